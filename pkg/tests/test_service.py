import pytest
from fastapi.testclient import TestClient

from smalite.service import app

from conftest import data, golden


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def counter_source():
    return data("counter.smala")


class TestCheck:
    def test_clean_program(self, client, counter_source):
        r = client.post("/check", json={"source": counter_source})
        assert r.status_code == 200
        body = r.json()
        assert body["ok"] is True
        assert body["diagnostics"] == []

    def test_no_prune_reports_cycle(self, client, counter_source):
        r = client.post("/check", json={"source": counter_source, "prune": False})
        body = r.json()
        assert body["ok"] is False
        assert any(d["code"] == "DEP_CYCLE" for d in body["diagnostics"])

    def test_diagnostics_payload_shape(self, client):
        r = client.post("/check", json={"source": data("conflict.smala")})
        (d,) = [d for d in r.json()["diagnostics"] if d["code"] == "RSSA"]
        assert d["severity"] == "error"
        assert "root.y" in d["paths"]
        assert "assignments" in d["message"]

    def test_unparsable_source_is_422(self, client):
        r = client.post("/check", json={"source": "Component root {"})
        assert r.status_code == 422

    def test_missing_body_field_is_422(self, client):
        assert client.post("/check", json={}).status_code == 422


class TestExecutionEndpoints:
    TRACE = (
        "trigger root.f._g1.btn1.r.release\n"
        "trigger root.f._g1.btn1.r.release\n"
        "trigger root.f._g1.btn1.r.release\n"
        "trigger root.f._g1.btn2.r.release\n"
    )

    def test_interp_matches_golden(self, client, counter_source):
        r = client.post("/interp", json={"source": counter_source, "trace": self.TRACE})
        assert r.status_code == 200
        assert r.json()["dump"] == golden("counter.t1.dump")

    def test_run_matches_interp(self, client, counter_source):
        a = client.post("/interp", json={"source": counter_source, "trace": self.TRACE})
        b = client.post("/run", json={"source": counter_source, "trace": self.TRACE})
        assert a.json()["dump"] == b.json()["dump"]

    def test_run_refuses_rejected_program(self, client):
        r = client.post(
            "/run", json={"source": data("conflict.smala"), "trace": "trigger root.s"}
        )
        assert r.status_code == 422

    def test_bad_trace_is_422(self, client, counter_source):
        r = client.post("/interp", json={"source": counter_source, "trace": "what"})
        assert r.status_code == 422


class TestCompileAndGraph:
    def test_compile_ir(self, client, counter_source):
        r = client.post("/compile", json={"source": counter_source})
        assert r.json()["target"] == "ir"
        assert r.json()["text"] == golden("counter.ir")

    def test_compile_c(self, client, counter_source):
        r = client.post("/compile", json={"source": counter_source, "target": "c"})
        assert r.json()["target"] == "c"
        assert r.json()["text"] == golden("counter.c")

    def test_graph(self, client, counter_source):
        r = client.post("/graph", json={"source": counter_source})
        assert r.json()["dot"] == golden("counter.dot")


class TestSessions:
    def test_lifecycle(self, client, counter_source):
        r = client.post("/sessions", json={"source": counter_source})
        assert r.status_code == 200
        sid = r.json()["session_id"]
        assert r.json()["dump"].startswith("== init")

        r = client.post(
            f"/sessions/{sid}/step",
            json={"event": "trigger root.f._g1.btn1.r.release"},
        )
        assert "== reaction 1" in r.json()["dump"]
        assert "env root.count = 2" in r.json()["dump"]

        r = client.post(
            f"/sessions/{sid}/step",
            json={"event": "trigger root.f._g1.btn1.r.release"},
        )
        assert "env root.count = 1" in r.json()["dump"]

        assert client.delete(f"/sessions/{sid}").status_code == 200
        assert client.delete(f"/sessions/{sid}").status_code == 404

    def test_failed_step_keeps_state(self, client, counter_source):
        sid = client.post("/sessions", json={"source": counter_source}).json()[
            "session_id"
        ]
        r = client.post(f"/sessions/{sid}/step", json={"event": "trigger root.nope"})
        assert "== error 1 inadmissible" in r.json()["dump"]
        r = client.post(
            f"/sessions/{sid}/step",
            json={"event": "trigger root.f._g1.btn1.r.release"},
        )
        assert "env root.count = 2" in r.json()["dump"]
        client.delete(f"/sessions/{sid}")

    def test_unknown_session_is_404(self, client):
        r = client.post("/sessions/zzz/step", json={"event": "trigger root.x"})
        assert r.status_code == 404

    def test_multi_event_step_rejected(self, client, counter_source):
        sid = client.post("/sessions", json={"source": counter_source}).json()[
            "session_id"
        ]
        r = client.post(
            f"/sessions/{sid}/step",
            json={"event": "trigger root.zero\ntrigger root.zero"},
        )
        assert r.status_code == 422
        client.delete(f"/sessions/{sid}")
