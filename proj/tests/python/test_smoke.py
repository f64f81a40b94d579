# Copyright 2026 The Gauntlet Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests for the Python module."""

import io
import json
import time
import zipfile

import pytest

import gauntlet

EVAL_SH = (
    "#!/bin/sh\n"
    'echo "{\\"result\\":{\\"accuracy\\":0.75,\\"error_rate\\":0.25},'
    '\\"item_count\\":$(($6 - $5))}"\n'
)


def manifest(**overrides):
    m = {
        "schema_version": 1,
        "id": "py-demo",
        "title": "Python demo",
        "description_html": "<p>demo</p>",
        "default_metric": "accuracy",
        "metrics": {
            "accuracy": {"higher_is_better": True},
            "error_rate": {"higher_is_better": False},
        },
        "evaluator": {"kind": "predictions", "entrypoint": "eval/run.sh",
                      "chunkable": True, "wall_seconds": 60},
        "phases": [{"id": "p-dev", "codename": "dev", "name": "dev",
                    "start": "2020-01-01T00:00:00.000Z", "end": None,
                    "submission_limit_per_day": 0}],
        "splits": [{"id": "s-test", "codename": "test", "name": "test",
                    "item_count": 8, "annotations": "annotations/test.json"}],
        "phase_splits": [{"phase_id": "p-dev", "split_id": "s-test",
                          "visibility": "public",
                          "leaderboard": ["accuracy", "error_rate"]}],
        "remote_evaluation": False,
    }
    m.update(overrides)
    return m


def bundle_bytes(m):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("challenge.json", json.dumps(m))
        info = zipfile.ZipInfo("eval/run.sh")
        info.external_attr = 0o100755 << 16
        zf.writestr(info, EVAL_SH)
        zf.writestr("annotations/test.json", json.dumps([0] * 8))
    return buf.getvalue()


def test_error_codes_and_status():
    codes = gauntlet.error_codes()
    assert "NotFound" in codes and "RateLimited" in codes
    assert len(codes) == len(set(codes))
    assert gauntlet.http_status("NotFound") == 404
    with pytest.raises(ValueError):
        gauntlet.http_status("NoSuchCode")


def test_timestamp_round_trip():
    ms = 1_780_000_000_123
    text = gauntlet.format_timestamp(ms)
    assert text == "2026-05-28T20:26:40.123Z"
    assert gauntlet.parse_timestamp(text) == ms
    assert gauntlet.parse_timestamp("yesterday") is None


def test_plan_chunks_covers_range():
    chunks = gauntlet.plan_chunks(1001, 4)
    assert chunks[0][0] == 0 and chunks[-1][1] == 1001
    assert all(a[1] == b[0] for a, b in zip(chunks, chunks[1:]))
    assert max(e - b for b, e in chunks) - min(e - b for b, e in chunks) <= 1


def test_merge_results_matches_count_oracle():
    # 3/4 and 1/6 correct: the merged accuracy is 4/10.
    parts = [
        {"result": {"accuracy": 3 / 4}, "item_count": 4},
        {"result": {"accuracy": 1 / 6}, "item_count": 6},
    ]
    merged = gauntlet.merge_results(parts, ["accuracy"])
    assert merged["item_count"] == 10
    assert merged["result"]["accuracy"] == 4 / 10
    with pytest.raises(gauntlet.GauntletError) as e:
        gauntlet.merge_results(parts, ["missing"])
    assert e.value.code == "SchemaMismatch"


def test_lint_reports_violations(tmp_path):
    ok = gauntlet.lint(bundle_bytes(manifest()))
    assert ok["valid"] and ok["violations"] == [] and ok["challenge_id"] == "py-demo"

    bad = manifest(default_metric="bleu")
    report = gauntlet.lint(bundle_bytes(bad))
    assert not report["valid"]
    assert ("phase_splits[0].leaderboard", "missing default metric 'bleu'") in report["violations"]

    # Directory form goes through the same checks.
    d = tmp_path / "bundle"
    with zipfile.ZipFile(io.BytesIO(bundle_bytes(manifest()))) as zf:
        zf.extractall(d)
    (d / "eval" / "run.sh").chmod(0o755)
    assert gauntlet.lint(str(d))["valid"]

    with pytest.raises(gauntlet.GauntletError) as e:
        gauntlet.lint(b"not a zip")
    assert e.value.code == "MalformedArchive"


def test_server_and_client_end_to_end(tmp_path):
    server = gauntlet.Server(str(tmp_path / "data"), admin_token="py-admin")
    base = server.start()
    try:
        assert server.admin_token == "py-admin"
        host = gauntlet.Client(base, server.create_team("host"))
        team = gauntlet.Client(base, server.create_team("team"))
        created = host.post_bytes("/challenges", bundle_bytes(manifest()), "application/zip")
        assert created["id"] == "py-demo"

        sub = team.post_bytes("/challenges/py-demo/phases/dev/submissions", b"[]")
        deadline = time.time() + 60
        view = team.get("/submissions/" + sub["id"])
        while view["status"] not in ("Finished", "Failed") and time.time() < deadline:
            time.sleep(0.05)
            view = team.get("/submissions/" + sub["id"])
        assert view["status"] == "Finished", view

        board = gauntlet.Client(base).get(
            "/challenges/py-demo/phases/dev/splits/test/leaderboard")
        assert board["entries"][0]["metrics"] == {"accuracy": 0.75, "error_rate": 0.25}

        with pytest.raises(gauntlet.GauntletError) as e:
            gauntlet.Client(base, "bogus").get("/submissions/" + sub["id"])
        assert e.value.code == "Unauthorized"
    finally:
        server.stop()

    with pytest.raises(gauntlet.TransportError):
        gauntlet.Client(base).get("/health")
