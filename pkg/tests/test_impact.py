"""Price engines: worked examples, cross-engine equivalences, quote
arithmetic, and the model-config validity rules."""

import numpy as np
import pytest

from impactlab import (
    ArPredictor,
    ImpactConfig,
    InputError,
    Kernel,
    ParameterError,
    SignSeries,
    TradeTape,
    burn_in_length,
    gen_iid_signs,
    gen_markov_signs,
    gen_volumes,
    impact_sizes,
    kernel_from_predictor,
    kyle_path,
    predictor_from_kernel,
    propagator_path,
    quote_series,
    quotes,
    surprise_path,
    vol_per_trade_to_per_time,
)
from impactlab.impact import cfg_noiseless


def _tape(eps, vols=None):
    eps = np.asarray(eps, dtype=np.float64)
    v = gen_volumes(eps.size) if vols is None else vols
    return TradeTape(SignSeries(eps, 0, "test", {}), v)


def test_kyle_path_worked_example():
    # eps (+1,-1,+1), v=1, lam=0.1: walk 100 -> 100.1 -> 100.0 -> 100.1
    p = kyle_path(_tape([1, -1, 1]), ImpactConfig(0.1, 1.0, None, 0.0, 100.0))
    assert np.allclose(p, [100.0, 100.1, 100.0, 100.1], rtol=0, atol=1e-12)


def test_null_model_is_a_constant_price():
    p = kyle_path(_tape([1, -1, 1, 1]), ImpactConfig(0.0, 1.0, None, 0.0, 5.0))
    assert np.all(p == 5.0)


def test_noise_only_path_diffuses_at_unit_rate():
    tape = _tape(gen_iid_signs(100_000, 0.5, 1).signs)
    p = kyle_path(tape, ImpactConfig(0.0, 1.0, None, 1.0, 0.0), seed=7)
    assert abs(np.var(np.diff(p)) - 1.0) < 0.05


def test_noise_is_reproducible_per_seed():
    tape = _tape(gen_iid_signs(100, 0.5, 1).signs)
    cfg = ImpactConfig(0.1, 1.0, None, 0.5, 0.0)
    assert np.array_equal(kyle_path(tape, cfg, seed=3), kyle_path(tape, cfg, seed=3))
    assert not np.array_equal(kyle_path(tape, cfg, seed=3), kyle_path(tape, cfg, seed=4))


def test_propagator_tabulated_worked_example():
    # G = (1, 0.5), two buys: p = (0, 1, 1.5)
    cfg = ImpactConfig(1.0, 1.0, Kernel.tabulated([1.0, 0.5]), 0.0, 0.0)
    assert np.array_equal(propagator_path(_tape([1, 1]), cfg), [0.0, 1.0, 1.5])


def test_permanent_propagator_reproduces_kyle_bitwise():
    tape = _tape(gen_markov_signs(2000, 0.5, 11).signs)
    cfg = ImpactConfig(0.3, 0.7, Kernel.permanent(), 0.5, 5.0)
    assert np.array_equal(kyle_path(tape, cfg, seed=3), propagator_path(tape, cfg, seed=3))


def test_paths_are_translation_invariant_and_sign_odd():
    tape = _tape(gen_markov_signs(500, 0.5, 11).signs)
    k = Kernel.power_law(0.25)
    pa = propagator_path(tape, ImpactConfig(0.3, 0.7, k, 0.0, 5.0))
    pb = propagator_path(tape, ImpactConfig(0.3, 0.7, k, 0.0, 9.0))
    assert np.allclose(pb - pa, 4.0, rtol=0, atol=1e-12)
    flipped = _tape(-tape.eps)
    pf = propagator_path(flipped, ImpactConfig(0.3, 0.7, k, 0.0, 5.0))
    assert np.allclose(pf - 5.0, -(pa - 5.0), rtol=0, atol=1e-12)


def test_surprise_path_with_matched_kernel_equals_propagator():
    tape = _tape(gen_markov_signs(2000, 0.5, 11).signs)
    pred = ArPredictor([0.5])
    cfg = ImpactConfig(1.0, 1.0, kernel_from_predictor(pred, 6), 0.0, 0.0)
    rs = np.diff(surprise_path(tape, pred, cfg))
    rp = np.diff(propagator_path(tape, cfg))
    assert np.max(np.abs(rs - rp)) / np.max(np.abs(rp)) < 1e-12


def test_surprise_path_with_zero_predictor_equals_kyle():
    tape = _tape(gen_iid_signs(300, 0.5, 2).signs)
    cfg = ImpactConfig(0.2, 0.8, None, 0.0, 1.0)
    ps = surprise_path(tape, ArPredictor([0.0]), cfg)
    assert np.allclose(ps, kyle_path(tape, cfg), rtol=0, atol=1e-14)


def test_kernel_eval_forms():
    k = Kernel.power_law(0.25, g1=2.0, plateau=0.5)
    assert k.eval(1) == 2.5
    assert abs(k.eval(16) - (2.0 * 16**-0.25 + 0.5)) < 1e-15
    t = Kernel.tabulated([1.0, 0.7, 0.6])
    assert t.eval(2) == 0.7
    assert t.eval(50) == 0.6  # table extrapolates at its last value
    assert t.finite_horizon == 3 and k.finite_horizon == 0
    assert Kernel.permanent().is_constant and not k.is_constant
    with pytest.raises(ParameterError):
        k.eval(0)


def test_kernel_validation():
    with pytest.raises(ParameterError):
        Kernel.power_law(-0.1)
    with pytest.raises(ParameterError):
        Kernel.power_law(0.3, g1=0.0)
    with pytest.raises(ParameterError):
        Kernel.tabulated([])
    with pytest.raises(ParameterError):
        Kernel.tabulated([1.0, np.nan])


def test_impact_config_validation():
    assert ImpactConfig(0.0, 1.0, None, 0.0, 0.0).lam == 0.0  # lam=0 legal
    with pytest.raises(ParameterError):
        ImpactConfig(-1.0, 1.0, None, 0.0, 0.0)
    with pytest.raises(ParameterError):
        ImpactConfig(1.0, 0.0, None, 0.0, 0.0)
    with pytest.raises(ParameterError):
        ImpactConfig(1.0, 1.2, None, 0.0, 0.0)
    with pytest.raises(ParameterError):
        ImpactConfig(1.0, 1.0, None, -0.5, 0.0)


def test_empty_tape_is_an_input_error():
    with pytest.raises((InputError, ParameterError)):
        kyle_path(_tape([]), ImpactConfig(0.1, 1.0, None, 0.0, 0.0))


def test_impact_sizes_are_signed_powers_of_volume():
    tape = _tape([1, -1], gen_volumes(2, "constant", value=4.0))
    assert np.array_equal(impact_sizes(tape, 0.5), [2.0, -2.0])


def test_kernel_from_predictor_worked_example():
    # a = (0.3, 0.2): G = 1, 1-.3, 1-.5, then flat
    k = kernel_from_predictor(ArPredictor([0.3, 0.2]), 4)
    assert np.array_equal(k.eval([1, 2, 3, 4]), [1.0, 0.7, 0.5, 0.5])


def test_predictor_kernel_round_trip():
    kern = Kernel.power_law(0.3)
    pred = predictor_from_kernel(kern, 8)
    back = kernel_from_predictor(pred, 8)
    lags = np.arange(1, 9)
    assert np.allclose(back.eval(lags), kern.eval(lags), rtol=0, atol=1e-15)


def test_predict_series_is_the_lagged_convolution():
    ps = ArPredictor([0.5]).predict_series(np.array([1.0, 1.0, -1.0]))
    assert np.array_equal(ps, [0.0, 0.5, 0.5])
    assert ArPredictor([0.5, -0.3]).worst_case_prediction == 0.8


def test_quotes_worked_examples():
    q = quotes(100.0, 0.5, ImpactConfig(1.0, 1.0, None, 0.0, 0.0), 1.0)
    assert (q.ask, q.bid, q.spread) == (100.5, 98.5, 2.0)
    q2 = quotes(50.0, -0.25, ImpactConfig(1.0, 0.5, None, 0.0, 0.0), 4.0)
    assert q2.spread == 4.0
    assert abs((q2.ask - q2.bid) - q2.spread) < 1e-12


def test_quotes_raise_on_predictor_blow_up():
    with pytest.raises(ParameterError, match="blow-up"):
        quotes(100.0, 1.0, ImpactConfig(1.0, 1.0, None, 0.0, 0.0), 1.0)
    with pytest.raises(ParameterError):
        quotes(100.0, 0.5, ImpactConfig(1.0, 1.0, None, 0.0, 0.0), 0.0)


def test_quote_series_reproduces_the_transaction_path():
    tape = _tape(gen_markov_signs(2000, 0.5, 11).signs)
    pred = ArPredictor([0.5])
    cfg = ImpactConfig(1.0, 1.0, kernel_from_predictor(pred, 6), 0.3, 0.0)
    ask, bid, spread = quote_series(tape, pred, cfg)
    p = surprise_path(tape, pred, cfg_noiseless(cfg))
    buys = tape.eps > 0
    assert np.allclose(ask[buys], p[1:][buys], rtol=0, atol=1e-12)
    assert np.allclose(bid[~buys], p[1:][~buys], rtol=0, atol=1e-12)
    assert np.all(spread == 2.0)


def test_volatility_per_time_scales_with_root_frequency():
    assert abs(vol_per_trade_to_per_time(0.02, 400.0) - 0.4) < 1e-15
    with pytest.raises(ParameterError):
        vol_per_trade_to_per_time(0.02, 0.0)


def test_burn_in_lengths_by_model_memory():
    assert burn_in_length() == 0
    assert burn_in_length(kernel=Kernel.permanent()) == 0
    assert burn_in_length(predictor=ArPredictor([0.5])) == 4096
    assert burn_in_length(kernel=Kernel.power_law(0.3)) == 4096
    long_table = Kernel.tabulated(np.arange(1, 3001.0) ** -0.3)
    assert burn_in_length(kernel=long_table) == 6000
