# pkrank/python/tests/test_smoke.py

# Copyright 2026  The pkrank Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
# WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
# MERCHANTABLITY OR NON-INFRINGEMENT.
# See the Apache 2 License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import pkrank


def test_metrics_match_numpy():
    x = np.array([1.0, 2.0, 4.0, 3.0, 9.0])
    y = np.array([2.0, 1.0, 5.0, 3.5, 7.0])
    assert pkrank.lcc(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)
    assert pkrank.srcc(x, x) == 1.0
    assert pkrank.krcc(x, -x) == -1.0
    with pytest.raises(pkrank.DataError):
        pkrank.lcc(np.ones(4), x[:4])


def test_oracle_rank_recovers_grades():
    s = pkrank.synth(5, 6, seed=3)
    assert len(s) == 5 and s.has_mos
    r = pkrank.rank(s, "oracle", "bs", jobs=2)
    assert r["comparisons"] == 5 * 4 // 2 * 6
    assert r["srcc"] == 1.0 and r["krcc"] == 1.0
    assert math.isclose(sum(r["scores"]), r["comparisons"])
    with pytest.raises(pkrank.ConfigError):
        pkrank.rank(s, "oracle", "fancy")


def test_log_mel_shape_and_rate():
    s = pkrank.synth(2, 1, seed=1)
    clip = s.clip(0, 0)
    assert clip.dtype == np.float32 and clip.size == 8000
    mel = pkrank.log_mel(clip)
    assert mel.ndim == 2 and mel.shape[1] == 120
    assert np.all(np.isfinite(mel))
    with pytest.raises(pkrank.DataError):
        pkrank.log_mel(clip, sample_rate=8000)


def test_checkpoint_round_trip_and_compare(tmp_path):
    p = pkrank.init_params(seed=4)
    path = str(tmp_path / "m.ckpt")
    pkrank.save_checkpoint(p, path)
    q = pkrank.load_checkpoint(path)
    assert q == p and q.num_values == p.num_values
    s = pkrank.synth(2, 1, seed=2)
    score, mos_a, mos_b = pkrank.compare(q, s.clip(0, 0), s.clip(1, 0))
    assert 0.0 <= score <= 1.0
    assert math.isfinite(mos_a) and math.isfinite(mos_b)
    est = pkrank.estimate_mos(q, s)
    assert len(est) == 2 and len(est[0]) == 1


def test_set_round_trip_and_short_training(tmp_path):
    s = pkrank.synth(3, 5, seed=6, duration_s=0.3)
    pkrank.save_set(s, str(tmp_path / "set"))
    t = pkrank.load_set(str(tmp_path / "set"))
    assert t.system_ids == s.system_ids
    params = pkrank.train(t, val_utts=2, epochs=1, lr=1e-3, seed=1)
    again = pkrank.train(t, val_utts=2, epochs=1, lr=1e-3, seed=1)
    assert params == again
    r = pkrank.rank(t, "model:" + _save(params, tmp_path), "nbs")
    assert r["comparator"].startswith("model:")
    with pytest.raises(pkrank.ConfigError):
        pkrank.train(t, val_utts=2, epochs=1, optimizer="rmsprop")


def _save(params, tmp_path):
    path = str(tmp_path / "t.ckpt")
    pkrank.save_checkpoint(params, path)
    return path
