"""Experiment configuration and the programmatic pipeline behind the CLI.

An ExperimentConfig bundles order-flow generation, the impact model, and
estimator settings into one JSON-serializable object. Pipelines:

  simulate : generate signs/volumes, price them, return a burned-in tape
  measure  : response / sign-autocorrelation / diffusivity / rho /
             volume-binned response, plus power-law fits
  invert   : recover a kernel table from measured response + autocorrelation
  manip    : the cost-frontier grid over (beta, psi)

Provenance for every output is the config hash + seed + package version;
no timestamps, so reruns are byte-identical.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .exceptions import EstimationError, InputError, NumericError, ParameterError
from .io import config_sha256
from .impact import (
    ArPredictor,
    ImpactConfig,
    Kernel,
    burn_in_length,
    kyle_path,
    propagator_path,
    surprise_path,
)
from .orderflow import (
    SignSeries,
    TradeTape,
    VolumeSeries,
    gen_clipped_fractional_signs,
    gen_iid_signs,
    gen_markov_signs,
    gen_metaorder_signs,
    gen_volumes,
)
from . import estimators as est

__all__ = [
    "ExperimentConfig",
    "expand_seeds",
    "simulate",
    "measure",
    "invert",
    "manip_frontier",
    "provenance",
    "kernel_from_spec",
    "kernel_to_spec",
]

# Offsets deriving independent RNG streams from one experiment seed. Signs
# use the seed itself; volumes and price noise must not share its stream.
_VOLUME_SEED_OFFSET = 1_000_003
_NOISE_SEED_OFFSET = 2_000_003


def _default_generator():
    return {"kind": "iid", "p_buy": 0.5}


def _default_volumes():
    return {"dist": "constant", "value": 1.0}


def _default_model():
    return {"kind": "kyle", "lam": 0.1, "psi": 1.0, "noise_sigma": 0.0, "p0": 0.0}


def _default_estimator():
    return {
        "max_lag": 256,
        "sign_max_lag": 512,
        "rho_window": 16,
        "rho_psi_weight": 1.0,
        "cond_lag": 1,
        "n_bins": 12,
        "min_count": 50,
        "j_tail": 4096,
        "invert_lags": 64,
    }


@dataclass
class ExperimentConfig:
    """Everything a run needs; round-trips losslessly through JSON."""

    n: int = 100_000
    seed: object = 1  # int, or [first, last] inclusive for a seed range
    generator: dict = field(default_factory=_default_generator)
    volumes: dict = field(default_factory=_default_volumes)
    model: dict = field(default_factory=_default_model)
    estimator: dict = field(default_factory=_default_estimator)
    manip: dict | None = None  # optional frontier stage for `report`
    out_dir: str | None = None  # None: resolved by the CLI

    def __post_init__(self):
        if int(self.n) < 1:
            raise ParameterError("n must be a positive integer")
        self.n = int(self.n)
        expand_seeds(self.seed)  # validates shape

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not d:
            raise ParameterError("empty config")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        # sections are taken verbatim (absent ones get the defaults), so a
        # config round-trips to exactly the dict it was built from
        return cls(**{k: d[k] for k in known if k in d})

    def sha256(self) -> str:
        return config_sha256(self.to_dict())


def expand_seeds(seed) -> list:
    """int -> [int]; [first, last] -> inclusive range; list -> as given."""
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        return [int(seed)]
    if isinstance(seed, (list, tuple)):
        if len(seed) == 2 and all(isinstance(s, (int, np.integer)) for s in seed):
            first, last = int(seed[0]), int(seed[1])
            if last < first:
                raise ParameterError(f"seed range [{first}, {last}] is empty")
            return list(range(first, last + 1))
        if seed and all(isinstance(s, (int, np.integer)) for s in seed):
            return [int(s) for s in seed]
    raise ParameterError(f"seed must be an int or [first, last], got {seed!r}")


def provenance(config: ExperimentConfig, seed: int | None = None) -> dict:
    out = {"config_sha256": config.sha256(), "version": __version__}
    if seed is not None:
        out["seed"] = int(seed)
    return out


def kernel_from_spec(spec: dict) -> Kernel:
    d = dict(spec)
    form = d.pop("form", None)
    if form == "power_law":
        return Kernel.power_law(**d)
    if form == "tabulated":
        if "values" not in d:
            raise ParameterError("tabulated kernel spec needs 'values'")
        return Kernel.tabulated(np.asarray(d["values"], dtype=np.float64))
    raise ParameterError(f"unknown kernel form {form!r}")


def kernel_to_spec(kernel: Kernel) -> dict:
    if kernel.form == "power_law":
        return {
            "form": "power_law",
            "beta": kernel.beta,
            "g1": kernel.g1,
            "plateau": kernel.plateau,
        }
    return {"form": "tabulated", "values": [float(v) for v in kernel.values]}


def _gen_signs(spec: dict, n: int, seed: int) -> SignSeries:
    d = dict(spec)
    kind = d.pop("kind", None)
    gens = {
        "iid": gen_iid_signs,
        "clipped_fractional": gen_clipped_fractional_signs,
        "metaorder": gen_metaorder_signs,
        "markov": gen_markov_signs,
    }
    if kind not in gens:
        raise ParameterError(f"unknown generator kind {spec.get('kind')!r}")
    try:
        return gens[kind](n, seed=seed, **d)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for generator '{kind}': {exc}") from None


def _gen_volumes(spec: dict, n: int, seed: int) -> VolumeSeries:
    d = dict(spec)
    dist = d.pop("dist", None)
    if dist is None:
        raise ParameterError("volume spec needs 'dist'")
    return gen_volumes(n, dist, seed=seed + _VOLUME_SEED_OFFSET, **d)


def _build_model(model: dict):
    """Returns (ImpactConfig, model kind, predictor or None)."""
    d = dict(model)
    kind = d.pop("kind", None)
    if kind not in ("kyle", "propagator", "surprise"):
        raise ParameterError(f"unknown model kind {kind!r}")
    kernel = None
    predictor = None
    if "kernel" in d:
        spec = d.pop("kernel")
        if spec is not None:
            kernel = kernel_from_spec(spec)
    if "predictor" in d:
        spec = d.pop("predictor")
        if spec is not None:
            predictor = ArPredictor(np.asarray(spec["coeffs"], dtype=np.float64),
                                    err_var=float(spec.get("err_var", 1.0)))
    if kind == "propagator" and kernel is None:
        raise ParameterError("propagator model needs a kernel spec")
    if kind == "surprise" and predictor is None:
        raise ParameterError("surprise model needs a predictor spec")
    cfg = ImpactConfig(
        lam=float(d.pop("lam", 1.0)),
        psi=float(d.pop("psi", 1.0)),
        kernel=kernel,
        noise_sigma=float(d.pop("noise_sigma", 0.0)),
        p0=float(d.pop("p0", 0.0)),
    )
    if d:
        raise ParameterError(f"unknown model keys: {sorted(d)}")
    return cfg, kind, predictor


def simulate(config: ExperimentConfig, seed: int):
    """Generate n + burn trades, price them, and keep the last n.

    Returns (TradeTape with prices, meta dict). The discarded prefix length
    is recorded as meta['burn']; the emitted price array is aligned so
    prices[i] is the pre-trade price of emitted trade i.
    """
    cfg, kind, predictor = _build_model(config.model)
    if kind == "kyle":
        burn = 0
    elif kind == "surprise":
        burn = burn_in_length(predictor=predictor)
    else:
        burn = burn_in_length(kernel=cfg.kernel)
    total = config.n + burn
    signs = _gen_signs(config.generator, total, seed)
    vols = _gen_volumes(config.volumes, total, seed)
    full = TradeTape(signs, vols)
    noise_seed = seed + _NOISE_SEED_OFFSET
    if kind == "kyle":
        prices = kyle_path(full, cfg, seed=noise_seed)
    elif kind == "propagator":
        prices = propagator_path(full, cfg, seed=noise_seed)
    else:
        prices = surprise_path(full, predictor, cfg, seed=noise_seed)
    tape = TradeTape(
        SignSeries(signs.signs[burn:], seed=seed, generator_tag=signs.generator_tag),
        VolumeSeries(vols.volumes[burn:], distribution_tag=vols.distribution_tag),
        prices=prices[burn:],
    )
    meta = {
        "burn": int(burn),
        "n": int(config.n),
        "model": dict(config.model),
        "generator": dict(config.generator),
        "volumes": dict(config.volumes),
        "provenance": provenance(config, seed),
    }
    return tape, meta


def measure(tape: TradeTape, spec: dict | None = None, burn: int = 0):
    """All standard curves and fits from one priced tape.

    Returns (results dict, errors dict). Estimation failures are collected
    per curve; everything that can be computed still is.
    """
    s = _default_estimator()
    if spec:
        s.update(spec)
    results: dict = {}
    errors: dict = {}

    def attempt(name, fn):
        try:
            results[name] = fn()
        except (EstimationError, NumericError, ParameterError, InputError) as exc:
            errors[name] = str(exc)

    max_lag = int(s["max_lag"])
    attempt("response", lambda: est.response(tape, max_lag=max_lag, burn=burn))
    attempt("sign_autocorr",
            lambda: est.sign_autocorr(tape.signs, max_lag=int(s["sign_max_lag"])))
    attempt("diffusivity", lambda: est.diffusivity(tape, max_lag=max_lag, burn=burn))
    attempt("rho", lambda: est.rho(tape, int(s["rho_window"]),
                                   psi_weight=float(s["rho_psi_weight"]), burn=burn))
    v_post = tape.v[burn:]
    if v_post.size and v_post.min() == v_post.max():
        # constant volumes cannot be binned; a structural skip, not a failure
        results.setdefault("notes", {})["conditional"] = "skipped: constant volumes"
    else:
        attempt("conditional", lambda: est.conditional_response(
            tape, int(s["cond_lag"]), n_bins=int(s["n_bins"]),
            min_count=int(s["min_count"]), burn=burn))

    fits: dict = {}
    if "sign_autocorr" in results:
        c = results["sign_autocorr"]
        hi = min(512, int(c.lags[-1]))
        if hi >= 8 * 2:
            try:
                f = est.fit_power_law(c, (8, hi))
                fits["gamma_hat"] = _fit_dict(f)
            except (EstimationError, ValueError) as exc:
                errors["gamma_fit"] = str(exc)
    if "conditional" in results:
        cond = results["conditional"]
        try:
            centers = cond.centers
            f = est.fit_power_law(cond, (float(centers[0]), float(centers[-1])))
            fits["psi_hat"] = _fit_dict(f)
        except (EstimationError, ValueError) as exc:
            errors["psi_fit"] = str(exc)
    if "diffusivity" in results:
        d = results["diffusivity"]
        ratio = float(d.values[-1] / d.values[0])
        fits["diffusion_ratio"] = ratio
        fits["diffusion_flag"] = (
            "superdiffusive" if ratio > 2.0
            else "subdiffusive" if ratio < 0.5
            else "diffusive"
        )
    if "rho" in results:
        fits["rho"] = float(results["rho"])
    results["fits"] = fits
    return results, errors


def _fit_dict(f) -> dict:
    return {
        "exponent": f.exponent,
        "slope": f.slope,
        "prefactor": f.prefactor,
        "r_squared": f.r_squared,
        "fit_range": list(f.fit_range),
    }


def invert(response_curve, sign_curve, lam: float, psi: float, v: float,
           n_kernel_lags: int, j_tail: int = 4096, ridge: float = 0.0):
    """CLI-facing wrapper around the response inversion; checks grids."""
    r_lags = np.asarray(response_curve.lags)
    if r_lags[0] != 1 or not np.array_equal(r_lags, np.arange(1, r_lags.size + 1)):
        raise ParameterError(
            f"response lags must be 1..L contiguous, got {r_lags[0]}..{r_lags[-1]} "
            f"({r_lags.size} rows)")
    need = max(int(r_lags[-1]) - 1, j_tail)
    c_lags = np.asarray(sign_curve.lags)
    if not np.array_equal(c_lags, np.arange(1, c_lags.size + 1)) or c_lags.size < need:
        raise ParameterError(
            f"sign-autocorrelation lags must be 1..{need} contiguous to invert a "
            f"response on lags 1..{r_lags[-1]} with j_tail={j_tail}; "
            f"got 1..{c_lags[-1]} ({c_lags.size} rows)")
    return est.invert_response(response_curve, sign_curve, lam, psi, v,
                               n_kernel_lags, j_tail=j_tail, ridge=ridge)


def manip_frontier(beta_values, psi_values, max_len: int = 8,
                   volume_grid=(1.0, 2.0, 4.0, 8.0), lam: float = 1.0,
                   budget: int = 10**7, own_impact: str = "full"):
    from .manipulation import gatheral_frontier

    return gatheral_frontier(beta_values, psi_values, max_len=max_len,
                             volume_grid=volume_grid, lam=lam, budget=budget,
                             own_impact=own_impact)
