"""
Data ingestion, preprocessing, the Gaussian-mixture generator and the
input/output sample-bias selection schemes.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .utils import make_rng


@dataclass
class Dataset:
    """Design matrix with optional outputs.

    Raw datasets loaded from CSV keep their categorical columns as string
    arrays in ``categorical``; after :func:`apply_preprocess` that mapping is
    empty and ``x`` holds every encoded feature.
    """

    x: np.ndarray
    y: np.ndarray | None = None
    feature_names: list = field(default_factory=list)
    seed_provenance: int | None = None
    categorical: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float)
            if self.y.ndim == 1:
                self.y = self.y[:, None]
            if len(self.y) != len(self.x):
                raise ValueError("x and y must have the same number of rows")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.x.shape[1])]

    def __len__(self):
        return len(self.x)

    def take(self, rows):
        rows = np.asarray(rows)
        return Dataset(
            self.x[rows],
            None if self.y is None else self.y[rows],
            list(self.feature_names),
            self.seed_provenance,
            {k: v[rows] for k, v in self.categorical.items()},
        )


@dataclass
class PreprocessStats:
    numeric_columns: list
    means: np.ndarray
    stds: np.ndarray
    categorical_levels: dict


@dataclass
class MixtureSpec:
    component_means: np.ndarray
    regression_coefs: np.ndarray
    source_props: np.ndarray
    target_props: np.ndarray
    component_std: float = 0.2

    def __post_init__(self):
        self.component_means = np.atleast_2d(
            np.asarray(self.component_means, dtype=float))
        self.regression_coefs = np.atleast_2d(
            np.asarray(self.regression_coefs, dtype=float))
        self.source_props = np.asarray(self.source_props, dtype=float)
        self.target_props = np.asarray(self.target_props, dtype=float)
        for name in ("source_props", "target_props"):
            p = getattr(self, name)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must be nonnegative and sum to 1")
        if not self.component_std > 0:
            raise ValueError("component_std must be positive")

    @property
    def num_components(self):
        return self.component_means.shape[0]

    @property
    def dim(self):
        return self.component_means.shape[1]

    def to_json(self):
        return json.dumps({
            "component_means": self.component_means.tolist(),
            "regression_coefs": self.regression_coefs.tolist(),
            "source_props": self.source_props.tolist(),
            "target_props": self.target_props.tolist(),
            "component_std": self.component_std,
        })

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def load_csv(path, target_columns=(), categorical_columns=()):
    """Read a comma-separated file with a header row.

    Target columns go to ``y``; categorical columns are kept as strings in
    ``Dataset.categorical``; every other column must be numeric.
    """
    target_columns = list(target_columns)
    categorical_columns = list(categorical_columns)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no data rows")
    for name in target_columns + categorical_columns:
        if name not in header:
            raise KeyError(f"{path}: missing column {name!r}")
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields,"
                             f" got {len(r)}")

    def numeric(name):
        j = header.index(name)
        out = np.empty(len(body))
        for i, r in enumerate(body):
            try:
                out[i] = float(r[j])
            except ValueError:
                raise ValueError(f"{path}:{i + 2}: non-numeric value "
                                 f"{r[j]!r} in column {name!r}") from None
        return out

    feature_cols = [h for h in header
                    if h not in target_columns and h not in categorical_columns]
    x = (np.column_stack([numeric(h) for h in feature_cols])
         if feature_cols else np.empty((len(body), 0)))
    y = (np.column_stack([numeric(h) for h in target_columns])
         if target_columns else None)
    cats = {h: np.array([r[header.index(h)].strip() for r in body])
            for h in categorical_columns}
    return Dataset(x, y, feature_cols, None, cats)


def write_csv(path, data):
    names = list(data.feature_names)
    cols = [data.x]
    if data.y is not None:
        names += [f"y{j}" for j in range(data.y.shape[1])]
        cols.append(data.y)
    mat = np.hstack(cols)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(names)
        for row in mat:
            writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def fit_preprocess(unbiased, categorical_columns=None):
    """Column means, population standard deviations and categorical levels
    of the unbiased dataset.  Constant columns get a standard deviation of 1."""
    if len(unbiased) < 2:
        raise ValueError("need at least two rows to fit preprocessing")
    if categorical_columns is None:
        categorical_columns = list(unbiased.categorical)
    means = unbiased.x.mean(axis=0)
    stds = unbiased.x.std(axis=0)
    stds[stds == 0] = 1.0
    levels = {c: sorted(set(unbiased.categorical[c].tolist()))
              for c in categorical_columns}
    return PreprocessStats(list(unbiased.feature_names), means, stds, levels)


def apply_preprocess(data, stats):
    """Standard-scale numeric columns and one-hot encode categoricals.

    Levels not seen when fitting encode as all zeros.
    """
    if list(data.feature_names) != stats.numeric_columns or \
            set(data.categorical) != set(stats.categorical_levels):
        raise ValueError("dataset columns do not match the preprocessing stats")
    blocks = [(data.x - stats.means) / stats.stds]
    names = list(stats.numeric_columns)
    for col, levels in stats.categorical_levels.items():
        vals = data.categorical[col]
        blocks.append(np.column_stack(
            [(vals == lv).astype(float) for lv in levels])
            if levels else np.empty((len(data), 0)))
        names += [f"{col}={lv}" for lv in levels]
    x = np.hstack(blocks)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values after preprocessing")
    return Dataset(x, data.y, names, data.seed_provenance, {})


# ---------------------------------------------------------------------------
# Synthetic mixture
# ---------------------------------------------------------------------------

def mixture_proportions(num_components):
    """Source and target mixing proportions for ``num_components >= 3``."""
    M = num_components
    if M < 3:
        raise ValueError("the mixture needs at least 3 components")
    source = np.full(M, 0.8 / (M - 1))
    source[-1] = 0.2
    target = np.full(M, 0.1 / (M - 2))
    target[-2] = 0.1
    target[-1] = 0.8
    return source, target


def make_mixture_spec(num_components=10, dim=2, seed=None, component_std=0.2):
    source, target = mixture_proportions(num_components)
    rng = make_rng(seed)
    means = rng.standard_normal((num_components, dim))
    coefs = rng.standard_normal((num_components, dim))
    return MixtureSpec(means, coefs, source, target, component_std)


def _draw_rows(probs, n, rng):
    # inverse CDF on the cumulative probabilities
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(idx, len(probs) - 1)


def sample_mixture(spec, n, which="source", seed=None, return_components=False):
    """Draw ``n`` rows from the source or target mixture.

    ``y = beta_k . x`` for a row drawn from component ``k``; the outputs are
    always generated so target samples can be scored.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    props = {"source": spec.source_props, "target": spec.target_props}[which]
    rng = make_rng(seed)
    comp = _draw_rows(props, n, rng)
    noise = rng.standard_normal((n, spec.dim))
    x = spec.component_means[comp] + spec.component_std * noise
    y = np.einsum("ij,ij->i", spec.regression_coefs[comp], x)
    data = Dataset(x, y[:, None], seed_provenance=seed)
    return (data, comp) if return_components else data


# ---------------------------------------------------------------------------
# Bias injection
# ---------------------------------------------------------------------------

def first_pc_scores(x):
    """Centered scores on the top principal axis.

    The axis sign is chosen so that its largest-magnitude loading is positive.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / len(x)
    _, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return xc @ v


def input_bias_probabilities(x):
    """Selection probabilities from a Gaussian bump on the first PC score,
    centered a third of the way from the minimum to the mean, with width an
    eighth of that gap."""
    c = first_pc_scores(x)
    lo, mu = c.min(), c.mean()
    gap = mu - lo
    if not gap > 1e-12 * max(1.0, abs(mu)):
        raise ValueError("degenerate PCA bias: first PC scores are all equal")
    center, width = lo + gap / 3.0, gap / 8.0
    dens = np.exp(-0.5 * ((c - center) / width) ** 2) / (width * np.sqrt(2 * np.pi))
    if not dens.sum() > 0:
        raise ValueError("degenerate PCA bias: all selection weights underflow")
    return dens / dens.sum()


def output_scores(y):
    """First principal score of ``y`` scaled to unit variance.

    For a single output this is ``y`` standardized.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    std = y.std(axis=0)
    std[std == 0] = 1.0
    ys = (y - y.mean(axis=0)) / std
    s = ys[:, 0] if ys.shape[1] == 1 else first_pc_scores(ys)
    sd = s.std()
    return s / sd if sd > 0 else s


def output_bias_probabilities(y):
    """Selection probabilities ``sigmoid(3 (y1 - 1))`` normalized to sum 1."""
    z = 3.0 * (output_scores(y) - 1.0)
    # logistic written to avoid overflow
    sig = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                   np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return sig / sig.sum()


def sample_rows(probs, n, seed=None):
    """Row indices drawn with replacement according to ``probs``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _draw_rows(np.asarray(probs, dtype=float), n, make_rng(seed))


def bias_input(data, n, seed=None, return_indices=False):
    """Biased resample of ``n`` rows selected on the inputs' first PC."""
    rows = sample_rows(input_bias_probabilities(data.x), n, seed)
    out = data.take(rows)
    out.seed_provenance = seed
    return (out, rows) if return_indices else out


def bias_output(data, n, seed=None, return_indices=False):
    """Biased resample of ``n`` rows selected on the outputs' first PC."""
    if data.y is None:
        raise ValueError("output bias needs y")
    rows = sample_rows(output_bias_probabilities(data.y), n, seed)
    out = data.take(rows)
    out.seed_provenance = seed
    return (out, rows) if return_indices else out


def no_bias(data, n, seed=None, return_indices=False):
    """Uniform resample with replacement (the unbiased control)."""
    rows = sample_rows(np.full(len(data), 1.0 / len(data)), n, seed)
    out = data.take(rows)
    out.seed_provenance = seed
    return (out, rows) if return_indices else out


BIAS_KINDS = {"input": bias_input, "output": bias_output, "none": no_bias}
