import os
import pathlib

import pytest

import tmtcg

DATA = pathlib.Path(os.environ.get("TMTCG_DATA_DIR", pathlib.Path(__file__).resolve().parents[2] / "data"))

SMALL = {
    "templates": str(DATA / "stride.templates.xml"),
    "target": "embedded",
    "seed": "3",
    "num_positive": "4",
    "num_negative": "4",
    "num_attack": "3",
    "max_length": "6",
    "attack.flood_connect.connections": "20",
}


@pytest.fixture(scope="module")
def threats_xml():
    return tmtcg.derive(str(DATA / "demo.dfd.xml"), str(DATA / "stride.templates.xml"), str(DATA / "default.matrix"))


def test_derive_and_import(threats_xml):
    threats = tmtcg.import_threats(threats_xml)
    assert len(threats) == 11
    assert all(t["score"] == t["likelihood"] * t["impact"] for t in threats)
    assert any(t["threat_id"] == "stride.denial_of_service@broker" for t in threats)


def test_generate_is_deterministic(threats_xml):
    assert tmtcg.generate(threats_xml, SMALL) == tmtcg.generate(threats_xml, SMALL)


def test_execute_and_diff(threats_xml):
    suite = tmtcg.generate(threats_xml, SMALL)
    before = tmtcg.execute(suite, SMALL)
    info = tmtcg.report_info(before)
    assert info["summary"]["fail"] == 0
    assert info["exit_code"] == 0
    assert info["environment_matches"]
    assert info["timeline"][0][3] is True
    assert tmtcg.diff(before, before) == []

    after = tmtcg.execute(suite, {**SMALL, "broker.max_connections": "5"})
    assert not tmtcg.report_info(after)["environment_matches"]
    changed = tmtcg.diff(before, after)
    assert changed
    assert all(any(step[1] == "flood_connect" for step in c["steps"]) for c in changed)


def test_errors_map_to_python_exceptions(threats_xml):
    with pytest.raises(tmtcg.ConfigError):
        tmtcg.generate(threats_xml, {"colour": "red"})
    with pytest.raises(tmtcg.FormatError):
        tmtcg.execute("{}", SMALL)
    with pytest.raises(tmtcg.StageError):
        tmtcg.derive("/nonexistent.xml", str(DATA / "stride.templates.xml"))


def test_helpers():
    assert tmtcg.encode_remaining_length(0) == b"\x00"
    assert tmtcg.encode_remaining_length(127) == b"\x7f"
    assert tmtcg.encode_remaining_length(128) == b"\x80\x01"
    assert tmtcg.topic_matches("a/+/c", "a/b/c")
    assert not tmtcg.topic_matches("#", "$SYS/x")


def test_mock_server_runs_a_tcp_target(threats_xml):
    server = tmtcg.MockServer({"broker.max_connections": "100"})
    try:
        assert server.port > 0
        cfg = {**SMALL, "target": f"tcp:127.0.0.1:{server.port}"}
        suite = tmtcg.generate(threats_xml, cfg)
        info = tmtcg.report_info(tmtcg.execute(suite, cfg))
        assert info["summary"]["fail"] == 0
    finally:
        server.stop()
