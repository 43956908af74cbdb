"""Heralded experiment runner: captures, leaks, heralding, serialization."""

import json

import numpy as np
import pytest

from heraldkit import fock
from heraldkit.errors import (
    DomainError,
    HeraldImprobableError,
    TruncationInsufficientError,
)


def tmsv_experiment(z, herald_n=3, operations=()):
    return fock.Experiment(
        source="tmsv", source_param=z, operations=operations, herald_n=herald_n
    )


def test_fidelity_pads_shorter_vector():
    a = np.zeros(6, dtype=complex)
    a[1] = 1.0
    b = np.zeros(10, dtype=complex)
    b[1] = 1.0
    assert abs(fock.fidelity(a, b) - 1.0) < 1e-15
    b[1] = 0.0
    b[9] = 1.0
    assert fock.fidelity(a, b) == 0.0


def test_fidelity_is_phase_invariant():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    a /= np.linalg.norm(a)
    assert abs(fock.fidelity(a, a * np.exp(0.7j)) - 1.0) < 1e-12


def test_number_distribution_drops_phases():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    nd = fock.number_distribution(a)
    assert np.all(nd >= 0)
    assert np.max(np.abs(nd - np.abs(a))) == 0.0
    assert np.max(np.abs(fock.number_distribution(a * np.exp(1.1j)) - nd)) < 1e-12


def test_tmsv_herald_probability_closed_form():
    # p(herald n) = tanh(r)^(2n) / cosh(r)^2 for an ideal two-mode squeezer
    res = fock.run_experiment(tmsv_experiment(1.0 + 0j, herald_n=3), 60)
    expected = np.tanh(1.0) ** 6 / np.cosh(1.0) ** 2
    assert abs(res.herald_probability - 0.08195290922380058) < 1e-12
    assert abs(res.herald_probability - expected) < 1e-12
    # heralding the tmsv leaves a number state behind
    assert abs(abs(res.amplitudes[3]) - 1.0) < 1e-9


def test_herald_distribution_sums_to_one():
    exp = tmsv_experiment(0.9 * np.exp(0.4j), operations=(("beamsplitter", 0.3),))
    dist = fock.herald_distribution(exp, 40)
    assert abs(dist.sum() - 1.0) < 1e-9
    res = fock.run_experiment(exp, 40, herald_floor=0.0)
    assert abs(dist[exp.herald_n] - res.herald_probability) < 1e-12


def test_tmsv_capture_guard():
    with pytest.raises(TruncationInsufficientError):
        fock.run_experiment(tmsv_experiment(1.2 + 0j), 30)
    res = fock.run_experiment(tmsv_experiment(0.8 + 0j), 30)
    assert res.truncation == 30


def test_coherent_capture_guard():
    def experiment(alpha):
        return fock.Experiment(
            source="independent",
            inputs=(("coherent", alpha), ("fock", 0)),
            operations=(("beamsplitter", 0.5),),
            herald_n=1,
        )

    with pytest.raises(TruncationInsufficientError):
        fock.run_experiment(experiment(3.8 + 0j), 30)
    fock.run_experiment(experiment(2.0 + 0j), 30)


def test_fock_input_above_cutoff_raises():
    exp = fock.Experiment(
        source="independent",
        inputs=(("fock", 7), ("fock", 0)),
        operations=(("beamsplitter", 0.5),),
        herald_n=1,
    )
    with pytest.raises(TruncationInsufficientError):
        fock.run_experiment(exp, 5)


def test_displacement_leak_raises():
    exp = fock.Experiment(
        source="independent",
        inputs=(("fock", 0), ("fock", 0)),
        operations=(("displacement", 0, 2.0 + 0j),),
        herald_n=0,
    )
    with pytest.raises(TruncationInsufficientError):
        fock.run_experiment(exp, 12)


def test_small_capture_deficit_is_recorded_not_fatal():
    res = fock.run_experiment(tmsv_experiment(1.0 + 0j), 30)
    assert len(res.losses) == 1
    assert 0.0 < res.losses[0] < 1e-6


def test_losses_tracked_per_operation():
    exp = tmsv_experiment(
        0.6 + 0j,
        operations=(("beamsplitter", 0.7), ("phase", 1, 0.9)),
    )
    res = fock.run_experiment(exp, 40)
    assert len(res.losses) == 3
    assert all(l >= 0.0 for l in res.losses)
    assert res.losses[2] < 1e-12  # phases never leak


def test_herald_floor_raises():
    with pytest.raises(HeraldImprobableError) as err:
        fock.run_experiment(tmsv_experiment(0.1 + 0j, herald_n=8), 30)
    assert err.value.probability < 1e-8


def test_herald_above_truncation_raises():
    with pytest.raises(TruncationInsufficientError):
        fock.run_experiment(tmsv_experiment(0.5 + 0j, herald_n=31), 30)


def test_result_amplitudes_are_readonly():
    res = fock.run_experiment(tmsv_experiment(0.8 + 0j), 40)
    with pytest.raises(ValueError):
        res.amplitudes[0] = 1.0


def test_phase_operation_applies_number_phases():
    base = tmsv_experiment(0.7 + 0j, herald_n=2)
    shifted = tmsv_experiment(0.7 + 0j, herald_n=2, operations=(("phase", 1, 0.63),))
    a = fock.run_experiment(base, 40).amplitudes
    b = fock.run_experiment(shifted, 40).amplitudes
    n = np.arange(41)
    assert np.max(np.abs(b - a * np.exp(1j * 0.63 * n))) < 1e-12


def test_beamsplitter_on_product_inputs_heralds_single_photon():
    # a 50:50 splitter on |1,1> gives the Hong-Ou-Mandel dip: herald 1 is impossible
    exp = fock.Experiment(
        source="independent",
        inputs=(("fock", 1), ("fock", 1)),
        operations=(("beamsplitter", 0.5),),
        herald_n=1,
    )
    dist = fock.herald_distribution(exp, 20)
    assert dist[1] < 1e-12
    assert abs(dist[0] + dist[2] - 1.0) < 1e-9


def test_experiment_validation():
    with pytest.raises(DomainError):
        fock.Experiment(source="thermal")
    with pytest.raises(DomainError):
        fock.Experiment(source="independent", inputs=(("fock", 0),))
    with pytest.raises(DomainError):
        fock.Experiment(
            source="independent",
            inputs=(("fock", 0), ("spin", 1)),
        )
    with pytest.raises(DomainError):
        fock.Experiment(source="tmsv", operations=(("kerr", 0.1),))
    with pytest.raises(DomainError):
        fock.Experiment(source="tmsv", herald_n=-1)


def test_experiment_json_roundtrip():
    exp = fock.Experiment(
        source="independent",
        inputs=(("squeezed", 0.7 * np.exp(0.3j)), ("coherent", 1.2 - 0.5j)),
        operations=(
            ("beamsplitter", 0.41),
            ("phase", 0, 1.1),
            ("displacement", 1, 0.3 + 0.2j),
        ),
        herald_n=4,
    )
    packed = json.dumps(exp.to_dict())
    back = fock.Experiment.from_dict(json.loads(packed))
    assert back == exp


def test_run_experiment_is_deterministic():
    exp = tmsv_experiment(0.7 + 0.2j, operations=(("beamsplitter", 0.55),))
    a = fock.run_experiment(exp, 35)
    b = fock.run_experiment(exp, 35)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert a.herald_probability == b.herald_probability
