"""Chain-quality and distribution-agreement statistics."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .exceptions import DegenerateSeriesError


def autocorrelation(x):
    """Normalized autocorrelation of a 1-D series at every lag (FFT based, biased)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0:
        raise DegenerateSeriesError("series is constant; autocorrelation is undefined")
    return acov / acov[0]


def integrated_autocorr_time(x):
    """Integrated autocorrelation time with Geyer's initial positive sequence.

    Lags are summed in adjacent pairs ``rho_{2m} + rho_{2m+1}`` until a pair
    turns non-positive. The estimate is floored at ``1 / log10(n)`` so that
    antithetic chains report ``ess > n`` instead of dividing by zero.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 values, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if np.ptp(x) == 0:
        raise DegenerateSeriesError("series is constant; ESS is undefined")
    rho = autocorrelation(x)
    total = 0.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        total += pair
    tau = -1.0 + 2.0 * total
    return max(tau, 1.0 / np.log10(n))


def ess(series):
    """Effective sample size ``n / tau``; per column for 2-D input."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 2:
        return np.array([ess(col) for col in x.T])
    return x.size / integrated_autocorr_time(x)


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def _second_moment_features(x):
    iu = np.triu_indices(x.shape[1])
    return (x[:, :, None] * x[:, None, :])[:, iu[0], iu[1]]


def _mean_and_se(f, correlated):
    mean = f.mean(axis=0)
    var = f.var(axis=0, ddof=1) if len(f) > 1 else np.zeros(f.shape[1])
    n_eff = np.full(f.shape[1], float(len(f)))
    if correlated:
        for j in range(f.shape[1]):
            if np.ptp(f[:, j]) > 0:
                n_eff[j] = ess(f[:, j])
    return mean, var / n_eff


@dataclass
class MomentComparison:
    """Standardized differences of first and second moments.

    ``second`` follows the upper-triangular (row-major, diagonal included)
    order of the outer product ``x x^T``.
    """

    first: np.ndarray
    second: np.ndarray

    @property
    def max_abs(self):
        return float(max(np.max(np.abs(self.first), initial=0.0), np.max(np.abs(self.second), initial=0.0)))

    def to_dict(self):
        return {"first": self.first.tolist(), "second": self.second.tolist(), "max_abs": self.max_abs}


def moment_compare(a, b, correlated_a=False, correlated_b=False):
    """Differences of sample means and second moments over their combined standard error.

    Set ``correlated_a`` / ``correlated_b`` for MCMC output: each statistic's
    variance is then divided by its effective sample size instead of its
    length.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = []
    for fa, fb in ((a, b), (_second_moment_features(a), _second_moment_features(b))):
        ma, va = _mean_and_se(fa, correlated_a)
        mb, vb = _mean_and_se(fb, correlated_b)
        diff = ma - mb
        se = np.sqrt(va + vb)
        with np.errstate(divide="ignore", invalid="ignore"):
            out.append(np.where(diff == 0, 0.0, diff / se))
    return MomentComparison(*out)


@dataclass
class DiagnosticsSummary:
    """Per-coordinate ESS and autocorrelation time, acceptance, and agreement tests."""

    ess: list
    act: list
    accept_rate: float
    ks_results: list = field(default_factory=list)
    moment_deltas: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(_jsonable(self.to_dict()), **kw)

    def csv_rows(self):
        """One row per coordinate: index, ESS, ACT and KS columns when present."""
        rows = []
        ks_by_coord = {}
        # Analytic references win over the split-half check.
        for r in sorted(self.ks_results, key=lambda r: r["reference"] == "analytic"):
            ks_by_coord[r["coordinate"]] = r
        for i, (e, t) in enumerate(zip(self.ess, self.act)):
            ks = ks_by_coord.get(i, {})
            rows.append({"coordinate": i, "ess": e, "act": t, "ks_statistic": ks.get("statistic"), "ks_pvalue": ks.get("pvalue")})
        return rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def summarize(samples, accept_rate, correlated=True, reference_cdfs=None):
    """Build a :class:`DiagnosticsSummary` for a sample matrix ``(n, d)``.

    KS and moment checks compare the first and second halves of the run
    (a stationarity check). ``reference_cdfs`` maps a coordinate index to
    an analytic CDF for an additional one-sample KS test.
    """
    x = np.asarray(samples, dtype=float)
    x = x.reshape(len(x), -1)
    n, d = x.shape
    ess_list, act_list = [], []
    for j in range(d):
        try:
            tau = integrated_autocorr_time(x[:, j]) if correlated else 1.0
            ess_list.append(n / tau)
            act_list.append(tau)
        except (DegenerateSeriesError, ValueError):
            ess_list.append(None)
            act_list.append(None)
    ks = []
    half = n // 2
    if half >= 1:
        for j in range(d):
            stat, pval = ks_two_sample(x[:half, j], x[half:, j])
            ks.append({"coordinate": j, "reference": "split-half", "statistic": stat, "pvalue": pval})
    for j, cdf in (reference_cdfs or {}).items():
        res = stats.kstest(x[:, j], cdf)
        ks.append({"coordinate": j, "reference": "analytic", "statistic": float(res.statistic), "pvalue": float(res.pvalue)})
    moments = {}
    if half >= 10:
        try:
            moments = moment_compare(x[:half], x[half:], correlated, correlated).to_dict()
        except (DegenerateSeriesError, ValueError):
            moments = {}
    return DiagnosticsSummary(ess_list, act_list, float(accept_rate), ks, moments)
