import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from etchprobe.analysis import resample_log
from etchprobe.classifier import (CONSISTENT, INDETERMINATE, UNDER_ETCHED, ClassifierConfig,
                                  compare, verdict_for)
from etchprobe.config import AnalysisConfig
from etchprobe.curves import TransientCurve
from etchprobe.mesh import scale_conductances
from etchprobe.pipeline import condition
from etchprobe.solver import transient_switch_off
from etchprobe.instrument import experiment_powers

ACFG = AnalysisConfig()
CFG = ClassifierConfig()


@pytest.fixture(scope="module")
def pair(simulated):
    ref = condition(simulated(0.0).temperatures["upper"], ACFG)
    cand = condition(simulated(0.1).temperatures["upper"], ACFG)
    return ref, cand


@pytest.mark.parametrize("ratio, consistency, verdict", [
    (1.0, 0.0, CONSISTENT), (1.99, 5.0, CONSISTENT), (2.0, 0.3, UNDER_ETCHED),
    (10.0, 0.0, UNDER_ETCHED), (2.0, 0.31, INDETERMINATE), (50.0, 2.0, INDETERMINATE),
])
def test_verdict_rule(ratio, consistency, verdict):
    assert verdict_for(ratio, consistency, CFG) == verdict


def test_reference_against_itself(pair):
    ref, _ = pair
    r = compare(ref, ref)
    assert r.amplitude_ratio == 1.0
    assert r.shift_decades == 0.0
    assert r.verdict == CONSISTENT


def test_conductance_scaled_reference_is_flagged(simulated, default_cfg):
    net = simulated(0.0).network
    on, off = experiment_powers(net, default_cfg.setup(), "upper", ("upper",))
    raw = [transient_switch_off(n, on, off)["upper"]
           for n in (net, scale_conductances(net, 10.0))]
    # no early cut: the initial excursion carries the exact resistance ratio
    no_cut = dataclasses.replace(ACFG, t_cut=0.0)
    ref, cand = (condition(c, no_cut) for c in raw)
    r = compare(ref, cand, dataclasses.replace(CFG, amplitude_mode="max"))
    assert r.amplitude_ratio == pytest.approx(10.0, rel=0.02)
    assert r.shift_decades == pytest.approx(1.0, abs=0.02)
    assert r.tau_consistency <= 0.05
    assert r.verdict == UNDER_ETCHED


def test_partially_etched_candidate_is_flagged(pair):
    r = compare(*pair)
    assert r.verdict == UNDER_ETCHED
    assert r.amplitude_ratio >= 4
    assert r.t_eval == 1e-5


def test_amplitude_without_time_shift_is_indeterminate(pair):
    ref, _ = pair
    r = compare(ref, ref.scaled(0.1))
    assert r.amplitude_ratio == pytest.approx(10.0)
    assert r.verdict == INDETERMINATE


@given(c=st.floats(1e-6, 1e6))
def test_common_rescaling_changes_nothing(pair, c):
    base = compare(*pair)
    r = compare(pair[0].scaled(c), pair[1].scaled(c))
    assert r.amplitude_ratio == pytest.approx(base.amplitude_ratio, rel=1e-9)
    assert r.shift_decades == pytest.approx(base.shift_decades, abs=1e-9)
    assert r.verdict == base.verdict


def test_swapping_inverts_the_diagnosis(pair):
    ab = compare(*pair)
    ba = compare(pair[1], pair[0])
    assert ab.amplitude_ratio * ba.amplitude_ratio == pytest.approx(1.0, abs=1e-9)
    assert ab.shift_decades == pytest.approx(-ba.shift_decades, abs=0.01)


def test_severity_is_monotone(simulated):
    ref = condition(simulated(0.0).temperatures["upper"], ACFG)
    ratios = [compare(ref, condition(simulated(f).temperatures["upper"], ACFG)).amplitude_ratio
              for f in (0.0, 0.05, 0.1, 0.2)]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))


def test_max_mode_uses_largest_excursion(pair):
    r = compare(*pair, dataclasses.replace(CFG, amplitude_mode="max"))
    assert r.t_eval is None
    assert r.reference_amplitude == pytest.approx(np.abs(pair[0].values).max())


def test_first_sample_used_when_cut_leaves_t_eval_just_before_it(pair):
    ref, cand = pair
    assert ref.t[0] > 1e-5 and math.log(ref.t[0] / 1e-5) < math.log(2) / 200
    r = compare(ref, cand)
    assert r.reference_amplitude == ref.values[0]


def test_mismatched_lattices_rejected(pair):
    ref, cand = pair
    with pytest.raises(ValueError, match="mismatched"):
        compare(ref, resample_log(cand, 100))
    shifted = resample_log(TransientCurve(cand.t * 2 ** 0.3 / 200 + cand.t, cand.values), 200)
    with pytest.raises(ValueError, match="mismatched"):
        compare(ref, shifted)


def test_voltage_curves_rejected(pair):
    ref, cand = pair
    with pytest.raises(ValueError, match="temperature"):
        compare(ref, cand.with_values(cand.values, kind="voltage"))


def test_report_fields(pair):
    d = compare(*pair).to_dict()
    assert set(d) == {"amplitude_ratio", "shift_decades", "tau_consistency", "verdict",
                      "thresholds", "amplitude_mode", "t_eval", "reference_amplitude",
                      "candidate_amplitude", "metadata"}
    assert d["thresholds"] == {"ratio_threshold": 2.0, "consistency_threshold": 0.3}
    assert d["tau_consistency"] == pytest.approx(abs(math.log10(d["amplitude_ratio"]) - d["shift_decades"]))
    assert d["metadata"]["candidate"]["etch_fraction"] == "0.1"


@pytest.mark.parametrize("change", [{"ratio_threshold": 0.0}, {"consistency_threshold": -1.0},
                                    {"amplitude_mode": "mean"}, {"t_eval": 0.0}])
def test_config_validation(pair, change):
    with pytest.raises(ValueError):
        compare(*pair, dataclasses.replace(CFG, **change))
