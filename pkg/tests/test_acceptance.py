"""Acceptance table: one test per criterion, one pass/fail line under
pytest -v. Each criterion function returns a CriterionResult whose details
carry the measured numbers; the assertion message echoes them on failure.
"""

from impactlab import acceptance


def _run(number):
    res = acceptance.ALL_CRITERIA[number]()
    assert res.passed, f"criterion {number} ({res.name}) failed: {res.details}"
    return res


def test_criterion_01_kyle_response_is_lag_flat():
    _run(1)


def test_criterion_02_rho_clean_unity_and_noise_dilution():
    _run(2)


def test_criterion_03_long_memory_generators_hit_gamma_band():
    _run(3)


def test_criterion_04_matched_kernel_restores_diffusion():
    _run(4)


def test_criterion_05_response_prediction_matches_measurement():
    _run(5)


def test_criterion_06_kernel_inversion_recovers_truth():
    _run(6)


def test_criterion_07_predictor_and_kernel_routes_agree():
    _run(7)


def test_criterion_08_surprise_costs_split_by_confirmation():
    _run(8)


def test_criterion_09_volume_exponent_and_barra_fit():
    _run(9)


def test_criterion_10_quotes_spread_and_kappa_stability():
    _run(10)


def test_criterion_11_manipulation_frontier():
    _run(11)


def test_criterion_12_master_curve_collapse():
    _run(12)


def test_criterion_13_pipeline_reproducibility_round_trips():
    _run(13)
