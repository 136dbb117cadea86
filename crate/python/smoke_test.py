"""Smoke test for the steersim Python bindings.

Install the extension first:
    pip install -e crates/py --no-build-isolation
then run either `python3 python/smoke_test.py` or `pytest python/`.
"""
import math
import tempfile
from pathlib import Path

import pytest

import steersim


def test_default_config_round_trips():
    text = steersim.default_config()
    assert "ttc_at_event" in text
    result = steersim.run_trial(5, subject=1, config_toml=text)
    again = steersim.run_trial(5, subject=1)
    assert result["metrics"] == again["metrics"]


def test_single_trial():
    r = steersim.run_trial(3, subject=2)
    m = r["metrics"]
    assert r["trial_id"] == "s02_c3"
    assert m["max_swa"] > 0
    assert not m["collided"]
    trace = r["trace"]
    n = len(trace["t"])
    assert n > r["analysis_end"] > 0
    assert all(len(col) == n for col in trace.values())
    steps = [b - a for a, b in zip(trace["t"], trace["t"][1:])]
    assert all(abs(s - 1 / 120) < 1e-9 for s in steps)


def test_bad_condition_raises_value_error():
    with pytest.raises(ValueError):
        steersim.run_trial(9)
    with pytest.raises(ValueError):
        steersim.run_trial(1, config_toml="[scenario]\nbogus = 1\n")


def test_experiment_targets_and_outputs():
    with tempfile.TemporaryDirectory() as tmp:
        r = steersim.run_experiment(jobs=2, out_dir=tmp)
        assert (Path(tmp) / "manifest.json").is_file()
        assert len(list((Path(tmp) / "traces").iterdir())) == 84
    assert len(r["records"]) == 84
    assert r["failures"] == []
    assert r["orderings"]["collisions"] == 0
    t = r["targets"]
    assert t["myo_vs_takeover_slip_p"] < 0.05
    assert t["crosswalk_slip_p"] > 0.05


def test_stats_match_scipy():
    stats = pytest.importorskip("scipy.stats")
    x = [1.83, 0.5, 1.62, 2.48, 1.68, 1.88, 1.55, 3.06, 1.3, 2.2, 0.9, 1.1]
    y = [0.878, 0.647, 0.598, 2.05, 1.06, 1.29, 1.06, 3.14, 1.29, 1.9, 1.2, 0.7]
    w, p = steersim.shapiro_wilk(x)
    ref = stats.shapiro(x)
    assert math.isclose(w, ref.statistic, abs_tol=1e-6)
    assert math.isclose(p, ref.pvalue, abs_tol=1e-6)
    _, p = steersim.wilcoxon(x, y)
    ref = stats.wilcoxon(x, y, method="exact")
    assert math.isclose(p, ref.pvalue, rel_tol=1e-12)


def test_compare_records_provenance():
    x = [0.1, 0.1, 0.2, 0.1, 0.15, 0.1, 0.2, 0.1, 0.1, 0.12, 9.0, 0.1]
    y = [0.3, 0.2, 0.25, 0.3, 0.35, 0.2, 0.3, 0.3, 0.2, 0.22, 0.4, 0.3]
    r = steersim.compare(x, y)
    assert r["test_name"] == "wilcoxon_signed_rank"
    assert r["provenance"][0]["test_name"] == "shapiro_wilk"
    with pytest.raises(steersim.StatsError):
        steersim.shapiro_wilk([1.0] * 12)


def test_latin_square():
    sq = steersim.latin_square(6)
    assert all(sorted(row) == list(range(1, 7)) for row in sq)
    assert all(sorted(col) == list(range(1, 7)) for col in zip(*sq))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
