"""Impact observables measured from priced tapes, exponent fits, the
forward response prediction from a kernel plus sign autocorrelation, and the
linear inversion of that relation for the kernel.

Conventions shared by the lag statistics:
- prices have length N+1 for N trades; the product at index n pairs the
  sign of trade n with the price move that starts at the pre-trade price.
- `burn` drops the first `burn` trades (and their prices) from the
  statistic, implementing the measurement-side burn-in policy.
- overlapping estimators report the naive SE = std/sqrt(count), which
  understates the error under dependence; non-overlapping window modes can
  report a batch-means SE instead (see response()).
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.fft import fft, ifft

from .exceptions import EstimationError, InputError, NumericError, ParameterError
from .impact import ArPredictor, Kernel
from .orderflow import SignSeries, TradeTape

__all__ = [
    "LagCurve",
    "ConditionalResponse",
    "PowerLawFit",
    "BarraFit",
    "CollapseResult",
    "response",
    "conditional_response",
    "rho",
    "sign_autocorr",
    "diffusivity",
    "normalized_autocorr",
    "fit_power_law",
    "predict_response",
    "invert_response",
    "levinson_durbin",
    "master_curve_rescale",
    "fit_barra",
    "pool_curves",
]

ROLES = ("response", "sign_autocorr", "diffusivity", "rho")


@dataclass
class LagCurve:
    """A per-lag statistic with sample counts and optional standard errors.

    role_tag is one of "response", "sign_autocorr", "diffusivity", "rho".
    Sign-autocorrelation values outside [-1, 1] (possible for degenerate
    inputs, e.g. odd-length alternating series exceed -1 by O(1/N^2)) are
    flagged in meta rather than rejected.
    """

    lags: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    role_tag: str
    se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.se is not None:
            self.se = np.asarray(self.se, dtype=np.float64)
            if self.se.shape != self.values.shape:
                raise ParameterError("se must match values in shape")
        if self.role_tag not in ROLES:
            raise ParameterError(f"unknown role_tag '{self.role_tag}'")
        if self.lags.size != self.values.size or self.lags.size != self.counts.size:
            raise ParameterError("lags, values, counts must have equal length")
        if self.lags.size == 0:
            raise ParameterError("curve must be nonempty")
        if np.any(self.lags < 1) or np.any(np.diff(self.lags) <= 0):
            raise ParameterError("lags must be positive and strictly increasing")
        if np.any(self.counts < 1):
            raise ParameterError("counts must be >= 1")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("values must be finite")
        if self.role_tag == "diffusivity" and np.any(self.values < 0):
            raise ParameterError("diffusivity values must be >= 0")
        if self.role_tag == "sign_autocorr" and (
            np.any(self.values > 1.0) or np.any(self.values < -1.0)
        ):
            self.meta["range_flag"] = True

    def __len__(self):
        return self.lags.size

    def value_at(self, lag: int) -> float:
        idx = np.searchsorted(self.lags, lag)
        if idx >= self.lags.size or self.lags[idx] != lag:
            raise ParameterError(f"lag {lag} not in curve")
        return float(self.values[idx])

    def dense_values(self, upto: int) -> np.ndarray:
        """Values on contiguous lags 1..upto as a plain array (index l-1).
        Requires the curve to cover exactly those lags from 1."""
        if self.lags[0] != 1 or self.lags.size < upto or np.any(np.diff(self.lags[:upto]) != 1):
            raise ParameterError(f"curve must cover contiguous lags 1..{upto}")
        return self.values[:upto]


@dataclass
class ConditionalResponse:
    """Per-volume-bin response at a fixed lag T: mean of (p_{n+T}-p_n)*eps_n
    over trades whose volume falls in the bin."""

    bin_lo: np.ndarray
    bin_hi: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    T: int
    se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bin_lo = np.asarray(self.bin_lo, dtype=np.float64)
        self.bin_hi = np.asarray(self.bin_hi, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        sizes = {self.bin_lo.size, self.bin_hi.size, self.values.size, self.counts.size}
        if len(sizes) != 1 or self.bin_lo.size == 0:
            raise ParameterError("bins, values, counts must be nonempty and equal length")
        if np.any(self.bin_hi <= self.bin_lo) or np.any(np.diff(self.bin_lo) <= 0):
            raise ParameterError("bin edges must be positive-width and increasing")
        if self.T < 1:
            raise ParameterError("T must be >= 1")

    @property
    def centers(self) -> np.ndarray:
        """Geometric bin centers."""
        return np.exp(0.5 * (np.log(self.bin_lo) + np.log(self.bin_hi)))


@dataclass
class PowerLawFit:
    """Log-log least-squares line. exponent is the slope magnitude; the
    signed slope says whether the curve decays (negative) or grows."""

    exponent: float
    slope: float
    prefactor: float
    fit_range: tuple
    r_squared: float
    exponent_se: float = float("nan")


@dataclass
class BarraFit:
    """Least-squares coefficient of the square-root impact family
    R(v) = A * sigma * sqrt(v/V)."""

    A: float
    r_squared: float


def _eps_of(signs) -> np.ndarray:
    if isinstance(signs, SignSeries):
        return signs.signs
    return np.asarray(signs, dtype=np.float64)


def _priced(tape: TradeTape) -> np.ndarray:
    if tape.prices is None:
        raise InputError("tape has no prices; run a price engine or load a priced tape")
    return tape.prices


def response(
    tape: TradeTape,
    max_lag: int | None = None,
    lags=None,
    overlap: bool = True,
    batches: int = 0,
    burn: int = 0,
) -> LagCurve:
    """Average price move after a trade, signed by that trade:
    R(l) = mean_n[(p_{n+l} - p_n) eps_n] - mean[p_{n+l} - p_n] * mean[eps_n].

    overlap=True uses every start n (naive SE). overlap=False places windows
    on the non-overlapping grid n = 0, l, 2l, ...; with batches >= 2 the SE
    comes from that many contiguous batch means, which stays honest under
    long-range dependence where the naive SE does not.
    """
    p_all = _priced(tape)
    p = p_all[burn:]
    e = tape.eps[burn:]
    m = e.size
    if lags is None:
        if max_lag is None:
            raise ParameterError("give max_lag or lags")
        lag_arr = np.arange(1, max_lag + 1, dtype=np.int64)
    else:
        lag_arr = np.asarray(lags, dtype=np.int64)
    if lag_arr.size == 0 or lag_arr.max() >= m:
        raise ParameterError("lags must be nonempty and below the (post-burn) tape length")
    vals = np.empty(lag_arr.size)
    cnts = np.empty(lag_arr.size, dtype=np.int64)
    ses = np.empty(lag_arr.size)
    for i, l in enumerate(lag_arr):
        if overlap:
            dp = p[l:] - p[:-l]
            ee = e[: dp.size]
        else:
            starts = np.arange(0, m - l, l)
            if starts.size == 0:
                raise EstimationError(f"no non-overlapping window fits at lag {l}")
            dp = p[starts + l] - p[starts]
            ee = e[starts]
        prod = dp * ee
        vals[i] = prod.mean() - dp.mean() * ee.mean()
        cnts[i] = prod.size
        if not overlap and batches >= 2 and prod.size >= 2 * batches:
            bs = prod.size // batches
            bm = prod[: batches * bs].reshape(batches, bs).mean(axis=1)
            ses[i] = bm.std(ddof=1) / np.sqrt(batches)
        else:
            ses[i] = prod.std() / np.sqrt(prod.size)
    se_method = "batch_means" if (not overlap and batches >= 2) else "naive"
    return LagCurve(
        lag_arr, vals, cnts, "response", ses,
        {"overlap": overlap, "batches": batches, "se_method": se_method, "burn": burn},
    )


def conditional_response(
    tape: TradeTape,
    T: int,
    bins=None,
    n_bins: int = 12,
    q_lo: float = 0.001,
    q_hi: float = 0.999,
    min_count: int = 50,
    burn: int = 0,
) -> ConditionalResponse:
    """Volume-conditioned response: per-bin mean of (p_{n+T}-p_n)*eps_n over
    trades with v_n in the bin. Default bins are logarithmic between the
    q_lo and q_hi volume quantiles; bins under min_count are dropped."""
    p = _priced(tape)[burn:]
    e = tape.eps[burn:]
    v = tape.v[burn:]
    m = e.size
    if T < 1 or T >= m:
        raise ParameterError("T must be in [1, post-burn tape length)")
    dp = p[T:] - p[:-T]
    y = dp * e[: dp.size]
    vv = v[: dp.size]
    if bins is None:
        lo, hi = np.quantile(vv, q_lo), np.quantile(vv, q_hi)
        if not 0 < lo < hi:
            raise EstimationError("volume quantiles do not span a positive range")
        edges = np.exp(np.linspace(np.log(lo), np.log(hi), n_bins + 1))
    else:
        edges = np.asarray(bins, dtype=np.float64)
        if edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] <= 0:
            raise ParameterError("bins must be >= 2 increasing positive edges")
    idx = np.digitize(vv, edges)
    blo, bhi, vals, cnts, ses = [], [], [], [], []
    for b in range(1, edges.size):
        mask = idx == b
        c = int(mask.sum())
        if c < min_count:
            continue
        yb = y[mask]
        blo.append(edges[b - 1])
        bhi.append(edges[b])
        vals.append(yb.mean())
        cnts.append(c)
        ses.append(yb.std() / np.sqrt(c))
    if not vals:
        raise EstimationError(f"all volume bins under the occupancy floor {min_count}")
    return ConditionalResponse(
        np.array(blo), np.array(bhi), np.array(vals), np.array(cnts, dtype=np.int64),
        T, np.array(ses), {"min_count": min_count, "burn": burn},
    )


def rho(tape: TradeTape, T: int, psi_weight: float = 1.0, burn: int = 0) -> float:
    """Correlation between the window price change and the psi-weighted
    signed flow over non-overlapping windows of length T:
    E[dp * Q] / sqrt(E[dp^2] * E[Q^2]) with Q = sum eps * v^psi_weight."""
    p = _priced(tape)[burn:]
    e = tape.eps[burn:]
    v = tape.v[burn:]
    m = e.size
    if T < 1:
        raise ParameterError("T must be >= 1")
    w = m // T
    if w < 2:
        raise EstimationError(f"fewer than 2 non-overlapping windows of length {T}")
    dp = p[T * np.arange(1, w + 1)] - p[T * np.arange(w)]
    q = (e * v**psi_weight)[: w * T].reshape(w, T).sum(axis=1)
    denom = np.sqrt((dp * dp).mean() * (q * q).mean())
    if denom == 0:
        raise EstimationError("degenerate windows: zero price or flow variance")
    return float((dp * q).mean() / denom)


def sign_autocorr(signs, max_lag: int, centered: bool = True) -> LagCurve:
    """Sample sign autocorrelation on lags 1..max_lag:
    C(l) = mean_n[eps_n eps_{n+l}] - (mean eps)^2 (centering optional).

    Computed by FFT; per-lag counts are N-l. A (near-)constant series makes
    the centered estimator 0 at every lag; flagged as degenerate in meta.
    """
    eps = _eps_of(signs)
    n = eps.size
    if not 1 <= max_lag < n:
        raise ParameterError("max_lag must be in [1, N)")
    mu = eps.mean()
    m2 = 1 << int(np.ceil(np.log2(2 * n)))
    f = fft(eps, m2)
    raw = np.real(ifft(f * np.conj(f)))[: max_lag + 1]
    cnt = n - np.arange(max_lag + 1)
    cov = raw / cnt
    if centered:
        cov = cov - mu * mu
    lag0 = float(cov[0])
    meta = {"mean": float(mu), "lag0": lag0, "centered": centered}
    if abs(lag0) < 1e-12:
        meta["degenerate"] = True
    return LagCurve(
        np.arange(1, max_lag + 1), cov[1:], cnt[1:], "sign_autocorr", None, meta
    )


def diffusivity(prices, max_lag: int, burn: int = 0) -> LagCurve:
    """Variance of l-step price changes per unit lag, D(l) = Var(p_{n+l}-p_n)/l,
    over all sliding windows. Flat D characterizes a random walk."""
    p = np.asarray(prices.prices if isinstance(prices, TradeTape) else prices, dtype=np.float64)
    p = p[burn:]
    if p.size < max_lag + 2:
        raise ParameterError("need at least max_lag+2 prices after burn")
    lags = np.arange(1, max_lag + 1, dtype=np.int64)
    vals = np.empty(max_lag)
    cnts = np.empty(max_lag, dtype=np.int64)
    for i, l in enumerate(lags):
        d = p[l:] - p[:-l]
        vals[i] = d.var() / l
        cnts[i] = d.size
    return LagCurve(lags, vals, cnts, "diffusivity", None, {"burn": burn})


def normalized_autocorr(x, max_lag: int) -> np.ndarray:
    """Plain normalized autocorrelation of a series (lag 0..max_lag, biased
    normalization by the lag-0 sum). Utility for whiteness checks on
    returns or predictor residuals; not a LagCurve role."""
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean()
    m2 = 1 << int(np.ceil(np.log2(2 * xc.size)))
    f = fft(xc, m2)
    raw = np.real(ifft(f * np.conj(f)))[: max_lag + 1]
    if raw[0] == 0:
        raise EstimationError("zero-variance series")
    return raw / raw[0]


def fit_power_law(curve, fit_range) -> PowerLawFit:
    """Least-squares line in log-log coordinates over points whose x lies in
    fit_range = (lo, hi) inclusive. Accepts a LagCurve (x = lags), a
    ConditionalResponse (x = geometric bin centers), or an (x, y) pair.
    All y in range must be strictly positive."""
    if isinstance(curve, LagCurve):
        x, y = curve.lags.astype(np.float64), curve.values
    elif isinstance(curve, ConditionalResponse):
        x, y = curve.centers, curve.values
    else:
        x, y = (np.asarray(c, dtype=np.float64) for c in curve)
    lo, hi = fit_range
    mask = (x >= lo) & (x <= hi)
    if mask.sum() < 4:
        raise EstimationError("need at least 4 points in the fit range")
    xs, ys = x[mask], y[mask]
    if np.any(ys <= 0):
        raise EstimationError("nonpositive values in fit range; shift the range")
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    pred = slope * np.log(xs) + intercept
    ss_res = float(np.sum((np.log(ys) - pred) ** 2))
    ss_tot = float(np.sum((np.log(ys) - np.log(ys).mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 and ss_res < 1e-24 else max(0.0, 1.0 - ss_res / ss_tot) if ss_tot > 0 else 0.0
    lx = np.log(xs)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    se = float(np.sqrt(ss_res / (xs.size - 2) / sxx)) if xs.size > 2 and sxx > 0 else float("nan")
    return PowerLawFit(
        exponent=float(abs(slope)),
        slope=float(slope),
        prefactor=float(np.exp(intercept)),
        fit_range=(float(lo), float(hi)),
        r_squared=float(r2),
        exponent_se=se,
    )


def _dense_C(C, upto: int) -> np.ndarray:
    if isinstance(C, LagCurve):
        return C.dense_values(upto)
    c = np.asarray(C, dtype=np.float64)
    if c.size < upto:
        raise ParameterError(f"need C on lags 1..{upto}, got {c.size}")
    return c[:upto]


def _truncation_bound(kernel: Kernel, c: np.ndarray, lam, psi, v, max_ell: int, j_tail: int) -> float:
    """Majorant of the dropped tail sum_{j>J} (G(l+j)-G(j)) C(j), using a
    power-law extension of C fitted on its tail. The plateau part of G
    cancels in the difference, so the bound converges for gamma < 1."""
    scale = lam * v**psi
    if kernel.is_constant:
        return 0.0  # G(l+j) - G(j) vanishes identically
    if kernel.form == "tabulated" and j_tail >= kernel.finite_horizon:
        return 0.0
    if not np.any(np.abs(c) > 0):
        return 0.0  # no measured correlation, nothing dropped
    lo = max(1, j_tail // 8)
    try:
        cfit = fit_power_law((np.arange(1, c.size + 1), np.abs(c)), (lo, j_tail))
    except EstimationError:
        return float("nan")
    gam, pref = cfit.exponent, cfit.prefactor
    if kernel.form == "power_law":
        bg = kernel.beta
        if bg + gam <= 0:
            return float("nan")
        # |G(j)-G(j+l)| <= g1*beta*l*j^(-beta-1); integral remainder past J
        return scale * kernel.g1 * bg * max_ell * pref * j_tail ** (-bg - gam) / (bg + gam)
    # tabulated with j_tail < table length: finite numeric remainder
    js = np.arange(j_tail + 1, kernel.finite_horizon + 1)
    diff = np.abs(kernel.eval(np.minimum(js + max_ell, kernel.finite_horizon)) - kernel.eval(js))
    return scale * float(np.sum(diff * pref * js ** (-gam)))


def predict_response(
    kernel: Kernel, C, lam: float, psi: float, v: float,
    max_lag: int | None = None, lags=None, j_tail: int = 4096,
) -> LagCurve:
    """Forward response implied by a kernel and a sign autocorrelation:
    R(l) = lam*v^psi * [G(l) + sum_{0<j<l} G(l-j)C(j)
                          + sum_{j=1..j_tail} (G(l+j)-G(j))C(j)].

    The infinite tail sum is truncated at j_tail; a majorant of the dropped
    part is reported in meta["truncation_bound"]. Derived for constant
    volumes; with fluctuating volumes pass the per-trade reference scale v
    (approximate mode, see invert_response)."""
    if lags is None:
        if max_lag is None:
            raise ParameterError("give max_lag or lags")
        lag_arr = np.arange(1, max_lag + 1, dtype=np.int64)
    else:
        lag_arr = np.asarray(lags, dtype=np.int64)
    if lag_arr.size == 0 or lag_arr.min() < 1:
        raise ParameterError("lags must be >= 1")
    top = int(lag_arr.max())
    need = max(top - 1, j_tail)
    c = _dense_C(C, need)  # raises on insufficient horizon
    scale = lam * v**psi
    jt = np.arange(1, j_tail + 1)
    g_jt = kernel.eval(jt)
    vals = np.empty(lag_arr.size)
    for i, l in enumerate(lag_arr):
        mid = 0.0
        if l > 1:
            j = np.arange(1, l)
            mid = np.sum(kernel.eval(l - j) * c[j - 1])
        tail = np.sum((kernel.eval(l + jt) - g_jt) * c[jt - 1])
        vals[i] = scale * (float(kernel.eval(l)) + mid + tail)
    bound = _truncation_bound(kernel, c, lam, psi, v, top, j_tail)
    return LagCurve(
        lag_arr, vals, np.ones(lag_arr.size, dtype=np.int64), "response", None,
        {"predicted": True, "j_tail": j_tail, "truncation_bound": bound},
    )


def invert_response(
    R: LagCurve, C, lam: float, psi: float, v: float, L: int,
    j_tail: int = 4096, ridge: float = 0.0, cond_threshold: float = 1e10,
):
    """Least-squares kernel G(1..L) from measured response and sign
    autocorrelation, inverting the predict_response relation with G held at
    G(L) beyond the table (plateau extrapolation).

    Returns (Kernel.tabulated, report). The report carries the residual
    norm, the condition estimate (flagged above cond_threshold with a
    suggestion to use ridge > 0), and the equation count."""
    if not isinstance(R, LagCurve):
        raise ParameterError("R must be a LagCurve")
    n_eq = int(R.lags.max())
    r_dense = R.dense_values(n_eq)
    if L < 1 or L > n_eq:
        raise ParameterError("need 1 <= L <= max measured response lag")
    need = max(n_eq - 1, j_tail)
    c = _dense_C(C, need)
    c1 = np.concatenate([[0.0], c])  # c1[j] = C(j)
    a = np.zeros((n_eq, L))
    for l in range(1, n_eq + 1):
        row = a[l - 1]
        row[min(l, L) - 1] += 1.0
        if l > 1:
            j = np.arange(1, l)
            np.add.at(row, np.minimum(l - j, L) - 1, c1[j])
        j_in = max(0, min(j_tail, L - l))  # lags l+j that stay inside the table
        if j_in > 0:
            row[l : l + j_in] += c1[1 : j_in + 1]
        if j_tail > j_in:
            row[L - 1] += c1[j_in + 1 : j_tail + 1].sum()
        j_dia = min(j_tail, L - 1)  # the -G(j)C(j) part of the tail sum
        if j_dia > 0:
            row[:j_dia] -= c1[1 : j_dia + 1]
        if j_tail > j_dia:
            row[L - 1] -= c1[j_dia + 1 : j_tail + 1].sum()
    b = r_dense / (lam * v**psi)
    if ridge > 0:
        gram = a.T @ a + ridge * np.eye(L)
        sol = np.linalg.solve(gram, a.T @ b)
        sv = np.linalg.svd(a, compute_uv=False)
    else:
        sol, _res, _rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if sv[-1] == 0:
        raise NumericError("inversion matrix is singular")
    cond = float(sv[0] / sv[-1])
    residual = float(np.linalg.norm(a @ sol - b))
    # per-lag spread proxy: OLS standard errors from the residual scale;
    # ignores correlation of errors across response lags, hence a proxy
    dof = max(n_eq - L, 1)
    gram = a.T @ a + (ridge * np.eye(L) if ridge > 0 else 0.0)
    se_proxy = np.sqrt(residual**2 / dof * np.abs(np.diag(np.linalg.pinv(gram))))
    report = {
        "residual_norm": residual,
        "condition": cond,
        "ill_conditioned": cond > cond_threshold,
        "ridge": ridge,
        "equations": n_eq,
        "j_tail": j_tail,
        "se_proxy": se_proxy.tolist(),
    }
    if report["ill_conditioned"]:
        report["note"] = "condition estimate above threshold; ridge regularization suggested"
    return Kernel.tabulated(sol), report


def levinson_durbin(C, order: int, gamma0: float = 1.0) -> ArPredictor:
    """AR(order) coefficients solving the Yule-Walker equations for the
    autocovariance sequence (gamma0, C(1), C(2), ...), by the standard
    recursion. Returns the predictor with its one-step error variance."""
    if order < 1:
        raise ParameterError("order must be >= 1")
    c = _dense_C(C, order)
    r = np.concatenate([[gamma0], c])
    if gamma0 <= 0:
        raise NumericError("lag-0 autocovariance must be positive")
    a = np.zeros(order)
    e = float(gamma0)
    for k in range(1, order + 1):
        acc = r[k] - np.dot(a[: k - 1], r[1:k][::-1])
        kappa = acc / e
        if not np.isfinite(kappa) or abs(kappa) >= 1.0:
            raise NumericError(
                f"autocovariance not positive-definite at recursion step {k} "
                f"(reflection coefficient {kappa:.6g})"
            )
        a_new = a.copy()
        a_new[k - 1] = kappa
        if k > 1:
            a_new[: k - 1] = a[: k - 1] - kappa * a[: k - 1][::-1]
        a = a_new
        e *= 1.0 - kappa * kappa
        if e <= 0:
            raise NumericError(f"prediction-error variance vanished at step {k}")
    return ArPredictor(a, err_var=e)


@dataclass
class CollapseResult:
    """Curves rescaled onto a common grid plus the collapse quality metric
    (mean over the grid of (max-min)/mean across curves; 0 = perfect)."""

    x_grid: np.ndarray
    curves: list
    metric: float
    delta: float


def master_curve_rescale(stocks, delta: float = 0.3, grid_points: int = 50) -> CollapseResult:
    """Capitalization rescaling of per-stock impact curves: each (M, vbar,
    curve) maps to x = M^delta * v / vbar, y = M^delta * R(v). Curves are
    compared on a common log grid spanning the overlap of their x-supports
    (log-log interpolation, exact on power laws)."""
    if len(stocks) < 2:
        raise ParameterError("need at least 2 stocks")
    xs, ys = [], []
    for m_cap, vbar, curve in stocks:
        if m_cap <= 0 or vbar <= 0:
            raise ParameterError("capitalization and mean volume must be positive")
        x = m_cap**delta * curve.centers / vbar
        y = m_cap**delta * curve.values
        if np.any(y <= 0):
            raise EstimationError("curves must be positive for log-log collapse")
        xs.append(x)
        ys.append(y)
    lo = max(x.min() for x in xs)
    hi = min(x.max() for x in xs)
    if not lo < hi:
        raise EstimationError("no overlapping x-support across stocks")
    grid = np.exp(np.linspace(np.log(lo), np.log(hi), grid_points))
    interp = [
        np.exp(np.interp(np.log(grid), np.log(x), np.log(y))) for x, y in zip(xs, ys)
    ]
    stack = np.vstack(interp)
    metric = float(np.mean((stack.max(axis=0) - stack.min(axis=0)) / stack.mean(axis=0)))
    return CollapseResult(grid, interp, metric, delta)


def fit_barra(curve: ConditionalResponse, sigma: float, V: float) -> BarraFit:
    """Least-squares amplitude of the square-root impact family against a
    volume-conditioned response curve: minimizes sum (R(v) - A sigma
    sqrt(v/V))^2 over the occupied bins."""
    if sigma <= 0 or V <= 0:
        raise ParameterError("sigma and V must be positive")
    s = sigma * np.sqrt(curve.centers / V)
    denom = float(np.sum(s * s))
    if denom == 0:
        raise EstimationError("degenerate curve: zero regressor")
    a_hat = float(np.sum(curve.values * s) / denom)
    resid = curve.values - a_hat * s
    ss_tot = float(np.sum((curve.values - curve.values.mean()) ** 2))
    if ss_tot == 0:
        raise EstimationError("degenerate curve: zero variance across bins")
    return BarraFit(A=a_hat, r_squared=1.0 - float(np.sum(resid**2)) / ss_tot)


def pool_curves(curves) -> LagCurve:
    """Count-weighted pooling of per-seed curves measured on identical lag
    grids; the pooled curve is what acceptance bands are checked against
    when a single seed is too noisy."""
    if len(curves) < 1:
        raise ParameterError("need at least one curve")
    first = curves[0]
    for c in curves[1:]:
        if not np.array_equal(c.lags, first.lags) or c.role_tag != first.role_tag:
            raise ParameterError("curves must share lags and role")
    w = np.vstack([c.counts for c in curves]).astype(np.float64)
    v = np.vstack([c.values for c in curves])
    tot = w.sum(axis=0)
    vals = (v * w).sum(axis=0) / tot
    return LagCurve(
        first.lags, vals, tot.astype(np.int64), first.role_tag, None,
        {"pooled_from": len(curves)},
    )
