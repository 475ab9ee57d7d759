"""Synthetic trade-sign and volume generators.

Sign generators cover three autocorrelation regimes: independent signs,
long memory from a clipped fractional Gaussian latent series, and long
memory from metaorder splitting. All generators are pure functions of
(parameters, seed).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.fft import fft, ifft, irfft, rfft

from .exceptions import ParameterError

__all__ = [
    "SignSeries",
    "VolumeSeries",
    "TradeTape",
    "gen_iid_signs",
    "gen_clipped_fractional_signs",
    "gen_metaorder_signs",
    "gen_markov_signs",
    "gen_volumes",
    "latent_autocorr",
    "target_sign_autocorr",
    "sign_balance_zscore",
]


@dataclass
class SignSeries:
    """A +-1 trade-sign sequence with its generation provenance."""

    signs: np.ndarray
    seed: int
    generator_tag: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.signs = np.asarray(self.signs, dtype=np.float64)
        bad = ~np.isin(self.signs, (-1.0, 1.0))
        if bad.any():
            raise ParameterError("sign series must contain only -1 and +1")

    def __len__(self):
        return self.signs.size


@dataclass
class VolumeSeries:
    """Per-trade volumes, strictly positive."""

    volumes: np.ndarray
    distribution_tag: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.volumes = np.asarray(self.volumes, dtype=np.float64)
        if not np.all(np.isfinite(self.volumes)) or np.any(self.volumes <= 0):
            raise ParameterError("volumes must be strictly positive and finite")

    def __len__(self):
        return self.volumes.size


@dataclass
class TradeTape:
    """Aligned signs and volumes, optionally with a price path.

    Prices, when present, hold p_0..p_N for N trades: prices[n] is the
    price just before trade n.
    """

    signs: SignSeries
    volumes: VolumeSeries
    prices: np.ndarray | None = None
    dt_tag: str = "trade"

    def __post_init__(self):
        if len(self.signs) != len(self.volumes):
            raise ParameterError("signs and volumes must have equal length")
        if self.prices is not None:
            self.prices = np.asarray(self.prices, dtype=np.float64)
            if self.prices.size != len(self.signs) + 1:
                raise ParameterError("prices must have length N+1")

    @property
    def n(self) -> int:
        return len(self.signs)

    @property
    def eps(self) -> np.ndarray:
        return self.signs.signs

    @property
    def v(self) -> np.ndarray:
        return self.volumes.volumes


def gen_iid_signs(n: int, p_buy: float, seed: int) -> SignSeries:
    """Independent signs with P(+1) = p_buy."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 0.0 <= p_buy <= 1.0:
        raise ParameterError("p_buy must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    signs = np.where(rng.random(n) < p_buy, 1.0, -1.0)
    return SignSeries(signs, seed, "iid", {"p_buy": p_buy})


def _whitening_autocorr(gamma: float, n_lags: int, grid: int) -> np.ndarray:
    """Autocorrelation of the stationary autoregressive flow whose one-step
    coefficients a_j = j^(-b) - (j+1)^(-b), b = (1-gamma)/2, exactly whiten
    the matched power-law impact kernel.

    Computed spectrally: S(w) = 1/|1 - A(e^-iw)|^2 on a fine grid, then an
    inverse transform. The coefficient sum is 1 - J^(-b) < 1 at truncation
    J, so the spectrum stays finite at w = 0.
    """
    beta = (1.0 - gamma) / 2.0
    half = grid // 2
    j = np.arange(1, half + 1, dtype=np.float64)
    a = j ** (-beta) - (j + 1) ** (-beta)
    coef = np.zeros(grid)
    coef[0] = 1.0
    coef[1 : half + 1] = -a
    spectrum = 1.0 / np.abs(rfft(coef)) ** 2
    acov = irfft(spectrum, grid)
    return acov[: n_lags + 1] / acov[0]


def _next_pow2(n: int) -> int:
    return 1 << int(np.ceil(np.log2(max(n, 2))))


@lru_cache(maxsize=8)
def _latent_autocorr_cached(gamma: float, n_lags: int, completion: str) -> np.ndarray:
    if completion == "martingale":
        grid = 8 * _next_pow2(max(n_lags, 1024))
        c_target = _whitening_autocorr(gamma, n_lags, grid)
        # invert the clipping map so the sign autocorrelation equals c_target
        return np.sin(0.5 * np.pi * c_target)
    if completion == "plain":
        lags = np.arange(n_lags + 1, dtype=np.float64)
        rho = (1.0 + lags) ** (-gamma)
        rho[0] = 1.0
        return rho
    raise ParameterError(f"unknown completion '{completion}'")


def latent_autocorr(gamma: float, n_lags: int, completion: str = "martingale") -> np.ndarray:
    """Latent Gaussian autocorrelation at lags 0..n_lags used by the clipped
    generator. completion="martingale" makes the clipped signs' correlation
    equal that of the flow exactly whitened by the matched power-law kernel;
    completion="plain" is the simple (1+l)^(-gamma) profile.
    """
    if not 0.0 < gamma < 1.0:
        raise ParameterError("gamma must lie in (0, 1)")
    return _latent_autocorr_cached(float(gamma), int(n_lags), completion).copy()


def target_sign_autocorr(gamma: float, n_lags: int, completion: str = "martingale") -> np.ndarray:
    """Population sign autocorrelation of the clipped generator, via the
    arcsine clipping map C(l) = (2/pi) arcsin(rho_latent(l))."""
    rho = latent_autocorr(gamma, n_lags, completion)
    return (2.0 / np.pi) * np.arcsin(rho)


@lru_cache(maxsize=8)
def _embedding_eigenvalues(gamma: float, n: int, completion: str) -> np.ndarray:
    # circulant embedding of the latent covariance; tiny negative eigenvalues
    # from the embedding are clipped to zero
    rho = _latent_autocorr_cached(gamma, n, completion)
    emb = np.concatenate([rho, rho[-2:0:-1]])
    ev = np.real(fft(emb))
    return np.clip(ev, 0.0, None)


def gen_clipped_fractional_signs(
    n: int, gamma: float, seed: int, completion: str = "martingale"
) -> SignSeries:
    """Signs of a long-memory Gaussian latent series, sign autocorrelation
    tail proportional to l^(-gamma).

    The latent series is synthesized exactly by circulant-embedding spectral
    synthesis; the clipping map C_sign(l) = (2/pi) arcsin(rho_latent(l))
    preserves the tail exponent.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 0.0 < gamma < 1.0:
        raise ParameterError("gamma must lie in (0, 1); the long-memory regime")
    ev = _embedding_eigenvalues(float(gamma), int(n), completion)
    m = ev.size
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    latent = np.real(ifft(np.sqrt(ev) * z)) * np.sqrt(m)
    signs = np.where(latent[:n] >= 0.0, 1.0, -1.0)
    return SignSeries(signs, seed, "clipped_fractional", {"gamma": gamma, "completion": completion})


def gen_metaorder_signs(
    n: int, alpha: float, seed: int, fixed_length: int | None = None
) -> SignSeries:
    """Signs from sequential metaorder splitting: lengths L are Pareto with
    P(L > l) = l^(-alpha), each metaorder emits L equal signs of random
    direction. Tail exponent of the sign autocorrelation is gamma = alpha-1.

    fixed_length is a test hook that bypasses the Pareto draw (1 gives
    independent signs, >= n a single metaorder covering the tape).
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if fixed_length is None and not 1.0 < alpha < 2.0:
        raise ParameterError("alpha must lie in (1, 2): finite mean, long memory")
    if fixed_length is not None and fixed_length < 1:
        raise ParameterError("fixed_length must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    pos = 0
    while pos < n:
        if fixed_length is not None:
            length = fixed_length
        else:
            # integer ceiling of the continuous Pareto gives P(L>l) = l^(-alpha) exactly
            length = int(np.ceil(rng.random() ** (-1.0 / alpha)))
        direction = 1.0 if rng.random() < 0.5 else -1.0
        take = min(length, n - pos)
        out[pos : pos + take] = direction
        pos += take
    return SignSeries(out, seed, "metaorder", {"alpha": alpha, "fixed_length": fixed_length})


def gen_markov_signs(n: int, c1: float, seed: int) -> SignSeries:
    """Two-state Markov signs with E[eps_n | eps_{n-1}] = c1 * eps_{n-1},
    hence autocorrelation C(l) = c1^l. The reference short-memory flow for
    predictor and quote checks."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not -1.0 < c1 < 1.0:
        raise ParameterError("c1 must lie in (-1, 1)")
    rng = np.random.default_rng(seed)
    stay = 0.5 * (1.0 + c1)
    flips = rng.random(n) >= stay  # flips[0] decides against the initial +1
    start = 1.0 if rng.random() < 0.5 else -1.0
    # cumulative parity of flips gives the chain in one vectorized pass
    parity = np.cumsum(flips[1:]) % 2
    signs = np.empty(n)
    signs[0] = start
    signs[1:] = start * np.where(parity == 1, -1.0, 1.0)
    return SignSeries(signs, seed, "markov", {"c1": c1})


def gen_volumes(n: int, dist: str = "constant", seed: int = 0, **params) -> VolumeSeries:
    """Per-trade volumes.

    dist="constant": params value (default 1.0).
    dist="lognormal": params mu, sigma (defaults 0.0, 1.0).
    dist="pareto": params x_min, tail (defaults 1.0, 3.0); tail > 1 for a
    finite mean x_min*tail/(tail-1).
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if dist == "constant":
        value = float(params.get("value", 1.0))
        if value <= 0:
            raise ParameterError("constant volume must be positive")
        v = np.full(n, value)
    elif dist == "lognormal":
        mu = float(params.get("mu", 0.0))
        sigma = float(params.get("sigma", 1.0))
        if sigma <= 0:
            raise ParameterError("lognormal sigma must be positive")
        v = rng.lognormal(mu, sigma, n)
    elif dist == "pareto":
        x_min = float(params.get("x_min", 1.0))
        tail = float(params.get("tail", 3.0))
        if x_min <= 0:
            raise ParameterError("pareto x_min must be positive")
        if tail <= 1.0:
            raise ParameterError("pareto tail must exceed 1 for a finite mean")
        v = x_min * rng.random(n) ** (-1.0 / tail)
    else:
        raise ParameterError(f"unknown volume distribution '{dist}'")
    return VolumeSeries(v, dist, dict(params))


def sign_balance_zscore(signs) -> float:
    """Sample-mean imbalance in units of the iid standard error 1/sqrt(N).

    Only meaningful for generators with summable sign correlations; the
    long-memory generators exceed any fixed multiple of 1/sqrt(N) by design.
    """
    eps = signs.signs if isinstance(signs, SignSeries) else np.asarray(signs)
    return float(abs(eps.mean()) * np.sqrt(eps.size))
