"""Native statistical kernels: paired/Welch t-tests, OLS, logistic regression, VIF.

The Student-t tail is computed from a regularized incomplete beta implemented
here (continued fraction), so the kernels carry no statistics dependency;
numpy supplies the linear algebra only. Logistic fits use iteratively
reweighted least squares with step-halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SkillSpaceError


class TooFewSamples(SkillSpaceError):
    pass


class ZeroVariance(SkillSpaceError):
    pass


class RankDeficient(SkillSpaceError):
    def __init__(self, column: str):
        super().__init__(f"design is rank deficient at column {column!r}")
        self.column = column


class DidNotConverge(SkillSpaceError):
    def __init__(self, trace):
        super().__init__(f"no convergence after {len(trace)} iterations")
        self.trace = trace


class SeparationDetected(SkillSpaceError):
    pass


class SingleClass(SkillSpaceError):
    pass


# ---------------------------------------------------------------------------
# Regularized incomplete beta and the Student-t distribution
# ---------------------------------------------------------------------------

_CF_EPS = 3e-16
_CF_FPMIN = 1e-300
_CF_MAXIT = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability of Student t with `df` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def t_quantile(p: float, df: float) -> float:
    """Student-t quantile by bisection on the tail probability (p in (0, 1))."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if p == 0.5:
        return 0.0
    # symmetric: solve for the positive tail and mirror
    target = 2.0 * (1.0 - p) if p > 0.5 else 2.0 * p
    hi = 1.0
    while t_two_sided_p(hi, df) > target:
        hi *= 2.0
        if hi > 1e12:
            break
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_two_sided_p(mid, df) > target:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    return q if p > 0.5 else -q


def normal_two_sided_p(z: float) -> float:
    """Two-sided standard-normal tail (for Wald tests)."""
    return math.erfc(abs(z) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# t-tests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    mean_diff: float
    ci_low: float
    ci_high: float
    t_stat: float
    df: float
    p_value: float
    n: int

    def __post_init__(self):
        if not (self.ci_low <= self.mean_diff <= self.ci_high):
            raise ValueError("confidence interval does not bracket the mean difference")


def paired_t_test(x, y) -> TTestResult:
    """Classic paired t on the differences x - y; 95% two-sided CI."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    n = x.size
    if n < 2:
        raise TooFewSamples(f"need at least 2 pairs, got {n}")
    d = x - y
    mean = float(d.mean())
    var = float(d.var(ddof=1))
    if var <= 0.0:
        raise ZeroVariance("differences have zero sample variance")
    se = math.sqrt(var / n)
    t = mean / se
    df = n - 1
    crit = t_quantile(0.975, df)
    return TTestResult(mean_diff=mean, ci_low=mean - crit * se, ci_high=mean + crit * se,
                       t_stat=t, df=float(df), p_value=t_two_sided_p(t, df), n=n)


def welch_t_test(x, y) -> TTestResult:
    """Welch's unequal-variance t-test with Welch-Satterthwaite df."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx, ny = x.size, y.size
    if nx < 2 or ny < 2:
        raise TooFewSamples(f"need at least 2 observations per sample, got {nx} and {ny}")
    vx = float(x.var(ddof=1))
    vy = float(y.var(ddof=1))
    if vx <= 0.0 or vy <= 0.0:
        raise ZeroVariance("each sample must have positive variance")
    sx, sy = vx / nx, vy / ny
    se = math.sqrt(sx + sy)
    mean = float(x.mean() - y.mean())
    t = mean / se
    df = (sx + sy) ** 2 / (sx * sx / (nx - 1) + sy * sy / (ny - 1))
    crit = t_quantile(0.975, df)
    return TTestResult(mean_diff=mean, ci_low=mean - crit * se, ci_high=mean + crit * se,
                       t_stat=t, df=df, p_value=t_two_sided_p(t, df), n=nx + ny)


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------

@dataclass
class RegressionResult:
    names: list[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    p_values: np.ndarray
    n: int
    r_squared: float | None = None
    log_likelihood: float | None = None
    deviance: float | None = None
    n_iterations: int | None = None
    vif: dict[str, float] | None = None
    meta: dict = field(default_factory=dict)

    def coefficient(self, name: str) -> tuple[float, float, float]:
        """(coefficient, standard error, p-value) for a named predictor."""
        j = self.names.index(name)
        return (float(self.coefficients[j]), float(self.std_errors[j]),
                float(self.p_values[j]))


def _qr_check_rank(X: np.ndarray, names) -> tuple[np.ndarray, np.ndarray]:
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    tol = max(X.shape) * np.finfo(np.float64).eps * (diag.max() if diag.size else 0.0)
    bad = np.nonzero(diag <= tol)[0]
    if bad.size:
        raise RankDeficient(str(names[bad[0]]))
    return Q, R


def ols(X, y, names=None) -> RegressionResult:
    """Ordinary least squares via QR, with classic standard errors and t p-values.

    R^2 is the centered coefficient of determination.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    n, k = X.shape
    if names is None:
        names = [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise ValueError("names length must match column count")
    if n <= k:
        raise TooFewSamples(f"need n > k, got n={n}, k={k}")
    Q, R = _qr_check_rank(X, names)
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = n - k
    sigma2 = rss / dof
    r_inv = np.linalg.inv(R)
    xtx_inv_diag = np.einsum("ij,ij->i", r_inv, r_inv)
    se = np.sqrt(sigma2 * xtx_inv_diag)
    p = np.empty(k)
    for j in range(k):
        if se[j] == 0.0:
            p[j] = 0.0 if beta[j] != 0.0 else 1.0
        else:
            p[j] = t_two_sided_p(float(beta[j] / se[j]), dof)
    tss = float(((y - y.mean()) ** 2).sum())
    if tss > 0.0:
        r2 = 1.0 - rss / tss
    else:
        r2 = 1.0 if rss <= 1e-300 else 0.0
    return RegressionResult(names=list(names), coefficients=beta, std_errors=se,
                            p_values=p, n=n, r_squared=r2)


def _log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    # sum y*eta - log(1 + e^eta), computed stably
    return float((y * eta).sum() - np.logaddexp(0.0, eta).sum())


def logistic_regression(X, y, names=None, max_iter: int = 50,
                        tol: float = 1e-8, separation_guard: float = 15.0) -> RegressionResult:
    """Maximum-likelihood logistic fit via IRLS with step-halving.

    Standard errors come from the inverse observed information at the optimum;
    p-values are two-sided Wald. Raises SeparationDetected when any coefficient
    exceeds `separation_guard` on the standardized scale, which signals
    (quasi-)separation long before the likelihood diverges.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    if names is None:
        names = [f"x{j}" for j in range(k)]
    if n <= k:
        raise TooFewSamples(f"need n > k, got n={n}, k={k}")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("response must be binary 0/1")
    if y.min() == y.max():
        raise SingleClass("response takes a single value")
    _qr_check_rank(X, names)

    col_sd = X.std(axis=0, ddof=1)
    beta = np.zeros(k)
    ll = _log_likelihood(X @ beta, y)
    trace = []
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-np.clip(eta, -30.0, 30.0)))
        w = np.clip(mu * (1.0 - mu), 1e-10, None)
        info = X.T @ (w[:, None] * X)
        score = X.T @ (y - mu)
        try:
            direction = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise RankDeficient(str(names[0])) from None
        step = 1.0
        while True:
            candidate = beta + step * direction
            ll_new = _log_likelihood(X @ candidate, y)
            if ll_new >= ll - 1e-12 or step < 2 ** -10:
                break
            step *= 0.5
        max_delta = float(np.abs(candidate - beta).max())
        beta, ll = candidate, ll_new
        trace.append((it, max_delta, ll))
        standardized = np.abs(beta) * col_sd
        if standardized.max(initial=0.0) > separation_guard:
            raise SeparationDetected(
                f"standardized coefficient magnitude {standardized.max():.2f} exceeds "
                f"{separation_guard}; data are likely separated")
        if max_delta < tol:
            break
    else:
        raise DidNotConverge(trace)

    eta = X @ beta
    mu = 1.0 / (1.0 + np.exp(-np.clip(eta, -30.0, 30.0)))
    w = np.clip(mu * (1.0 - mu), 1e-10, None)
    info = X.T @ (w[:, None] * X)
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    z = np.divide(beta, se, out=np.full(k, np.inf), where=se > 0)
    p = np.array([normal_two_sided_p(float(zj)) for zj in z])
    ll = _log_likelihood(eta, y)
    return RegressionResult(names=list(names), coefficients=beta, std_errors=se,
                            p_values=p, n=n, log_likelihood=ll, deviance=-2.0 * ll,
                            n_iterations=len(trace))


def vif(X, names=None) -> dict[str, float]:
    """Variance inflation factor per non-constant column.

    Each column is regressed on all the others (the constant included when
    present); VIF_j = 1 / (1 - R^2_j).
    """
    X = np.asarray(X, dtype=np.float64)
    n, k = X.shape
    if names is None:
        names = [f"x{j}" for j in range(k)]
    variable = [j for j in range(k) if X[:, j].std() > 0.0]
    if len(variable) < 2:
        raise ValueError("need at least 2 non-constant columns")
    _qr_check_rank(X, names)
    out: dict[str, float] = {}
    for j in variable:
        others = [c for c in range(k) if c != j]
        fit = ols(X[:, others], X[:, j], [names[c] for c in others])
        r2 = min(fit.r_squared, 1.0 - 1e-12)
        out[str(names[j])] = 1.0 / (1.0 - r2)
    return out


def read_design_csv(path: str, response: str | None = None):
    """Read a headered CSV into (column names, matrix) or split out a response column."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=np.float64)
    if response is None:
        return header, data
    j = header.index(response)
    y = data[:, j]
    keep = [c for c in range(len(header)) if c != j]
    return [header[c] for c in keep], data[:, keep], y
