import numpy as np
import pytest

from nbiotsim.core import dbm_to_mw, multi_group_params, single_group_params
from nbiotsim.channel import (
    assign_ce_group,
    detect_preamble,
    detect_preambles,
    preamble_tx_power,
    received_preamble_power,
    rsrp,
)


@pytest.fixture
def params():
    return multi_group_params()


def detection_closed_form(p_rx_mw, n_repe, params):
    # oracle: per symbol group P(h >= th*sigma2/Prx) = exp(-th*sigma2/Prx),
    # one repetition needs all four, detection needs at least one repetition
    p_sym = np.exp(-params.snr_threshold * params.noise_mw / p_rx_mw)
    return 1.0 - (1.0 - p_sym**4) ** n_repe


def test_rsrp_power_law(params):
    assert rsrp(2000.0, params) == pytest.approx(rsrp(1000.0, params) / 16.0)


def test_ce_group_annuli_in_12km_cell(params):
    # thresholds -120/-125 dBm with a 35 dBm broadcast and eta=4 put the
    # group boundaries at 7.5 km and 10.0 km
    assert assign_ce_group(rsrp(7000.0, params), params) == 0
    assert assign_ce_group(rsrp(8000.0, params), params) == 1
    assert assign_ce_group(rsrp(9990.0, params), params) == 1
    assert assign_ce_group(rsrp(10100.0, params), params) == 2
    assert assign_ce_group(rsrp(11900.0, params), params) == 2


def test_ce_group_exact_threshold_goes_to_group_one(params):
    # group 0 requires strictly greater RSRP than the first threshold
    assert assign_ce_group(params.rsrp_thr1_mw, params) == 1
    assert assign_ce_group(params.rsrp_thr2_mw, params) == 1
    assert assign_ce_group(params.rsrp_thr1_mw * 1.0001, params) == 0
    assert assign_ce_group(params.rsrp_thr2_mw * 0.9999, params) == 2


def test_groups_one_two_use_max_power(params):
    for g in (1, 2):
        for d in (100.0, 5000.0, 11900.0):
            assert preamble_tx_power(g, d, params) == pytest.approx(dbm_to_mw(23.0))


def test_group0_inversion_hits_target_and_caps(params):
    # inside the invertible range the received power equals the target
    d = 500.0
    rx = received_preamble_power(0, d, params)
    assert rx == pytest.approx(params.group0_target_rx_mw)
    # the cap binds exactly at 120 dB path loss (1 km for eta=4)
    assert preamble_tx_power(0, 1000.0, params) == pytest.approx(params.prach_max_mw)
    assert preamble_tx_power(0, 3000.0, params) == pytest.approx(params.prach_max_mw)


def test_detection_monotone_in_repetitions(params):
    p_rx = params.noise_mw  # mean received SNR of 0 dB
    probs = [detection_closed_form(p_rx, n, params) for n in (1, 2, 4, 8, 16, 32)]
    assert all(b >= a for a, b in zip(probs, probs[1:]))


def test_detection_at_zero_db_matches_spec_value(params):
    # e^-1 per symbol group, 0.3679^4 per repetition, four repetitions
    assert detection_closed_form(params.noise_mw, 4, params) == pytest.approx(0.0713, abs=2e-4)


def test_detect_preambles_matches_closed_form(params):
    rng = np.random.default_rng(11)
    n = 200_000
    # distance with mean received SNR of 0 dB for a group-2 device
    p_rx_target = params.noise_mw
    d = (params.prach_max_mw / p_rx_target) ** (1.0 / params.eta)
    hits = detect_preambles(np.full(n, 2), np.full(n, d), 4, params, rng)
    p_hat = hits.mean()
    p_true = detection_closed_form(p_rx_target, 4, params)
    sigma = np.sqrt(p_true * (1 - p_true) / n)
    assert abs(p_hat - p_true) < 3 * sigma


def test_degenerate_threshold_always_detects(params):
    p = params.override(snr_threshold=1e-12)
    rng = np.random.default_rng(1)
    assert detect_preambles(np.full(500, 2), np.full(500, 11900.0), 1, p, rng).all()


def test_detect_preamble_scalar_wrapper(params):
    rng = np.random.default_rng(5)
    out = detect_preamble(0, 200.0, 4, params, rng)
    assert isinstance(out, bool)
    # a power-controlled group-0 device near the eNB is essentially always heard
    hits = detect_preambles(np.zeros(1000), np.full(1000, 200.0), 1, params, rng)
    assert hits.mean() > 0.995


def test_empty_input(params):
    rng = np.random.default_rng(0)
    assert detect_preambles(np.array([]), np.array([]), 4, params, rng).size == 0
