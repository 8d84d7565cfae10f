import json

import pytest

from vortex.archive import SessionArchive
from vortex.core import Role
from vortex.graphs import export
from vortex.jsonio import read_json
from vortex.nts import GraphRejected, MockBackend, graph_from_document
from vortex.physiology import builtin_scenario, replay
from vortex import plotting
from vortex.report import build_report
from vortex.server import Session, SessionConfig

from conftest import fig7_graph
from tools.mutations import BASE

T0 = 1_700_000_000_000_000
PNG = b"\x89PNG\r\n\x1a\n"

LINES = {
    Role.SURGEON: (5653, "Starting timeout. Nurse, call for help."),
    Role.NURSE: (5738, "Help is on the way, blood is coming."),
    Role.ANESTHESIOLOGIST: (5829, "Pressure is falling, giving a vasopressor."),
}


def make_archive():
    cfg = SessionConfig(builtin_scenario("Bleeding"), duration=6000.0)
    s = Session(cfg, 4242, clock=lambda: T0)
    ids = {r: s.admit({"role": r.value}).client_id for r in LINES}
    s.start()
    for role, (t, text) in LINES.items():
        s.record_upload(ids[role], {
            "records": [{"type": "utterance", "text": text, "t_us": T0 + t * 1_000_000},
                        {"type": "gaze", "dir": [0, 0, 1], "t_us": T0}],
            "sync_samples": [[T0, T0 + 500, T0 + 500, T0 + 1000]]})
    return s.finalize()


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    backend = MockBackend({}, default=json.dumps(BASE))
    expert = {"edges": [{"source": e["source"], "target": e["target"], "category": e["label"],
                         "t": e["description"].split()[0]} for e in BASE["edges"]]}
    return build_report(make_archive(), backend, out, expert=expert)


def test_bundle_lists_every_artifact(bundle):
    assert bundle.accepted and bundle.violations == []
    for key in ("transcript", "prompt", "completion", "graph", "dot", "graphml", "metrics",
                "agreement", "fig_graph", "fig_degrees", "fig_vitals"):
        assert bundle.path(key).is_file(), key


def test_manifest(bundle):
    doc = read_json(bundle.root / "bundle.json")
    assert doc["format"] == "vortex-bundle/1"
    assert doc["incomplete"] == [] and doc["session_id"] == 4242
    assert len(doc["prompt_sha256"]) == 64


def test_figures_are_png(bundle):
    for key in ("fig_graph", "fig_degrees", "fig_vitals"):
        assert bundle.path(key).read_bytes()[:8] == PNG


def test_graph_round_trips(bundle):
    data = bundle.path("graph").read_bytes()
    assert export(graph_from_document(json.loads(data)), "canonical-json") == data


def test_agreement_with_self_coded_expert(bundle):
    doc = read_json(bundle.path("agreement"))
    assert doc["percent_agreement"] == 1.0 and doc["kappa"] == 1.0


def test_metrics_tsv(bundle):
    rows = [r.split("\t") for r in bundle.path("metrics").read_text().splitlines()]
    assert rows[0] == ["role", "in_degree", "out_degree", "clustering"]
    assert {r[0] for r in rows[1:]} == {r.value for r in Role}


def test_bundle_from_loaded_archive(tmp_path):
    arch = SessionArchive.load(make_archive().write(tmp_path / "arch"))
    b = build_report(arch, MockBackend({}, default=json.dumps(BASE)), tmp_path / "b",
                     figures=False)
    assert "fig_graph" not in b.files and b.path("graph").is_file()


def test_rejected_graph(tmp_path):
    bad = dict(BASE, edges=[dict(BASE["edges"][0], label="Technical Skill"), BASE["edges"][1]])
    backend = MockBackend({}, default=json.dumps(bad))
    with pytest.raises(GraphRejected):
        build_report(make_archive(), backend, tmp_path / "strict", figures=False)
    b = build_report(make_archive(), backend, tmp_path / "salvaged", figures=False, salvage=True)
    assert not b.accepted and len(b.violations) == 1
    assert len(read_json(b.path("graph"))["edges"]) == 1


def test_plot_functions(tmp_path):
    g = fig7_graph()
    traj = replay(builtin_scenario("Pneumothorax"), [], 120.0, 5.0)
    paths = [
        plotting.plot_interaction_graph(g, tmp_path / "a" / "g.png", title="team"),
        plotting.plot_degrees(g, tmp_path / "d.png"),
        plotting.plot_vitals(traj, tmp_path / "v.png"),
        plotting.plot_likert({"Q1": [1, 2, 3, 4, 5], "Q2": [5, 5, 4]}, tmp_path / "l.png"),
    ]
    for p in paths:
        assert p.read_bytes()[:8] == PNG
