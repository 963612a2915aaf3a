import json
import tempfile
import unittest
from pathlib import Path

import pandas as pd
import pytest

from src.conf.config import config
from src.entity.models import Analysis, BoundaryCondition, MatrixTarget
from src.schemas.spectra import RunLedger
from src.schemas.sweep import SweepSpec, parse_config
from src.services import harness
from src.services.exceptions import ConfigParseError, ConfigurationError

SWEEPS = Path(__file__).resolve().parent.parent / "sweeps"
TIMING = ["assembly_ms", "analysis_ms"]


class TestParseConfig(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.path = Path(self._tmp.name) / "sweep.json"

    def tearDown(self):
        self._tmp.cleanup()

    def parse(self, payload: str) -> SweepSpec:
        self.path.write_text(payload, encoding="utf-8")
        return parse_config(self.path)

    def test_minimal_file_takes_defaults(self):
        spec = self.parse('{"p": 3, "h_den": [4, 5]}')
        self.assertEqual(spec.p, [3])
        self.assertEqual(spec.h_den, [4, 5])
        self.assertEqual(spec.k, ["min"])
        self.assertEqual(spec.dt, [0.1, 0.01])
        self.assertEqual(spec.beta, [0.0, 0.5])
        self.assertEqual(spec.bc, [BoundaryCondition.dirichlet])
        self.assertEqual(spec.target, [MatrixTarget.stiffness])
        self.assertEqual(spec.analyses, [Analysis.cond])
        self.assertEqual(spec.gamma, 0.5)

    def test_malformed_json_reports_position(self):
        with self.assertRaises(ConfigParseError) as ctx:
            self.parse('{"p": [2,\n "h_den": }')
        self.assertIn("line 2", str(ctx.exception))

    def test_invalid_pairs_are_listed(self):
        with self.assertRaises(ConfigParseError) as ctx:
            self.parse('{"p": [1, 3], "h_den": 3, "k": [2]}')
        self.assertIn("(1, 2)", str(ctx.exception))
        self.assertNotIn("(3, 2)", str(ctx.exception))

    def test_non_object_file(self):
        with self.assertRaises(ConfigParseError):
            self.parse("[1, 2, 3]")

    def test_negative_time_step(self):
        with self.assertRaises(ConfigParseError):
            self.parse('{"p": 2, "h_den": 3, "dt": [-0.1]}')


def test_selectors_resolve_per_degree():
    spec = SweepSpec(p=[2, 4], h_den=[3], k=["max"])
    assert spec.resolved_k() == [1, 3]
    assert SweepSpec(p=[4], h_den=[3], k=["all"]).resolved_k() == [1, 2, 3]
    assert SweepSpec(p=[4], h_den=[3], k=[0, "min"]).resolved_k() == [0, 1]


def test_unknown_selector_rejected():
    with pytest.raises(ValueError):
        SweepSpec(p=[4], h_den=[3], k=["some"])


def test_shipped_mass_sweep_has_fifty_configurations():
    spec = parse_config(SWEEPS / "mass_fig1.json")
    configurations = harness.enumerate_configurations(spec)
    assert len(configurations) == 50
    assert {c.target for c in configurations} == {MatrixTarget.mass}
    assert all(c.bc is None and c.dt is None for c in configurations)


def test_shipped_sweeps_parse():
    for path in sorted(SWEEPS.glob("*.json")):
        assert harness.enumerate_configurations(parse_config(path))


def test_enumeration_order():
    spec = SweepSpec(p=[2, 3], h_den=[3, 4], k=["min"], dt=[0.1], beta=[0.0, 0.5],
                     bc=["dirichlet", "neumann"], target=["stiffness"])
    labels = [c.label for c in harness.enumerate_configurations(spec)]
    assert len(labels) == 16
    assert labels[0] == "stiffness_dirichlet_p2_k1_h3_dt0.1_beta0"
    assert labels[1] == "stiffness_dirichlet_p2_k1_h4_dt0.1_beta0"
    assert labels[2] == "stiffness_dirichlet_p3_k1_h3_dt0.1_beta0"
    assert labels[4] == "stiffness_dirichlet_p2_k1_h3_dt0.1_beta0.5"
    assert labels[8] == "stiffness_neumann_p2_k1_h3_dt0.1_beta0"


def test_worker_count(mocker):
    assert harness.worker_count(3) == 3
    mocker.patch.object(config, "IGA_SPECTRA_THREADS", 2)
    assert harness.worker_count() == 2


def mass_spec(out_dir: Path, **kwargs) -> SweepSpec:
    fields = dict(p=[2], h_den=[3], k=["min"], target=["mass"], analyses=["cond"], out_dir=str(out_dir))
    fields.update(kwargs)
    return SweepSpec(**fields)


def test_single_mass_configuration(out_dir):
    spec = mass_spec(out_dir, analyses=["cond", "eig", "spy"])
    ledger = harness.run_sweep(spec, workers=1, progress=False)
    [entry] = ledger.entries
    assert entry.status == "ok"
    assert entry.label == "mass_p2_k1_h3"
    assert entry.row.cond_est >= 1.0
    assert entry.row.dof == 25
    assert entry.row.eig_computed
    assert (out_dir / "eig" / "mass_p2_k1_h3.csv").exists()
    assert (out_dir / "spy" / "mass_p2_k1_h3.txt").exists()
    assert Path(ledger.csv_path) == out_dir / "sweep.csv"
    stored = json.loads((out_dir / "ledger.json").read_text(encoding="utf-8"))
    assert stored["entries"][0]["label"] == "mass_p2_k1_h3"


def test_csv_is_reproducible_apart_from_timings(tmp_path):
    spec = mass_spec(tmp_path / "a", p=[2, 3], h_den=[2, 3], analyses=["cond", "eig"])
    harness.run_sweep(spec, workers=1, progress=False)
    harness.run_sweep(spec.model_copy(update={"out_dir": str(tmp_path / "b")}), workers=1, progress=False)
    first = pd.read_csv(tmp_path / "a" / "sweep.csv").drop(columns=TIMING)
    second = pd.read_csv(tmp_path / "b" / "sweep.csv").drop(columns=TIMING)
    pd.testing.assert_frame_equal(first, second)
    assert (tmp_path / "a" / "eig" / "mass_p3_k1_h3.csv").read_bytes() == \
        (tmp_path / "b" / "eig" / "mass_p3_k1_h3.csv").read_bytes()


def test_worker_pool_preserves_order(tmp_path):
    spec = mass_spec(tmp_path / "serial", p=[2, 3], h_den=[2, 3, 4])
    serial = harness.run_sweep(spec, workers=1, progress=False)
    pooled = harness.run_sweep(spec.model_copy(update={"out_dir": str(tmp_path / "pool")}), workers=2,
                               progress=False)
    assert [e.label for e in serial.entries] == [e.label for e in pooled.entries]
    first = pd.read_csv(tmp_path / "serial" / "sweep.csv").drop(columns=TIMING)
    second = pd.read_csv(tmp_path / "pool" / "sweep.csv").drop(columns=TIMING)
    pd.testing.assert_frame_equal(first, second)


def test_eigensolve_over_cap_is_skipped(out_dir):
    ledger = harness.run_sweep(mass_spec(out_dir, analyses=["cond", "eig"]), workers=1, progress=False,
                               max_dof=10)
    [entry] = ledger.entries
    assert entry.status == "skipped-too-large"
    assert not entry.row.eig_computed
    assert entry.row.cond_est >= 1.0


def test_eigensolve_over_cap_exports_pattern(out_dir):
    ledger = harness.run_sweep(mass_spec(out_dir, analyses=["eig"]), workers=1, progress=False, max_dof=10)
    [entry] = ledger.entries
    assert entry.status == "skipped-too-large"
    assert entry.row.cond_est >= 1.0
    assert (out_dir / "spy" / "mass_p2_k1_h3.txt").exists()
    assert not (out_dir / "eig").exists()


def test_failures_are_recorded_and_sweep_continues(out_dir, mocker):
    build = harness.build_matrix
    calls = []

    def flaky(configuration):
        calls.append(configuration.label)
        if configuration.h_den == 3:
            raise ConfigurationError("System matrix is singular", configuration.label)
        if configuration.h_den == 4:
            raise RuntimeError("unexpected")
        return build(configuration)

    mocker.patch.object(harness, "build_matrix", side_effect=flaky)
    ledger = harness.run_sweep(mass_spec(out_dir, h_den=[2, 3, 4]), workers=1, progress=False)
    assert [e.status for e in ledger.entries] == ["ok", "failed", "failed"]
    assert "singular" in ledger.failed[0].error
    assert ledger.failed[1].error.startswith("RuntimeError")
    assert len(calls) == 3
    frame = pd.read_csv(out_dir / "sweep.csv")
    assert len(frame) == 1
    assert int(frame.loc[0, "h_den"]) == 2


def test_stiffness_configuration_row(out_dir):
    spec = SweepSpec(p=[3], h_den=[3], k=["max"], dt=[0.01], beta=[0.5], bc=["abc"], target=["stiffness"],
                     analyses=["cond"], out_dir=str(out_dir))
    [entry] = harness.run_sweep(spec, workers=1, progress=False).entries
    assert entry.status == "ok"
    assert entry.row.bc == "abc"
    assert entry.row.dt == 0.01
    assert entry.row.k == 2
    line = (out_dir / "sweep.csv").read_text(encoding="utf-8").splitlines()[1]
    assert line.startswith("abc,3,2,3,0.01,0.5,0.5,1,stiffness,36,")


class TestEmitReport(unittest.TestCase):

    def test_empty_ledger(self):
        spec = SweepSpec(p=[2], h_den=[3])
        bundle = harness.emit_report(RunLedger(), spec)
        self.assertEqual(bundle.summary, "")
        self.assertEqual(bundle.files, {})


def test_report_bundles_and_exponents(out_dir):
    spec = mass_spec(out_dir, p=[2, 3], h_den=[2, 3, 4, 5], k=["min", "max"])
    ledger = harness.run_sweep(spec, workers=1, progress=False)
    bundle = harness.emit_report(ledger, spec)
    assert "cond_vs_h" in bundle.files
    assert "cond_vs_p" in bundle.files
    assert "cond_vs_k" in bundle.files
    assert (out_dir / "summary.txt").read_text(encoding="utf-8") == bundle.summary
    assert "Configurations: 16" in bundle.summary
    modes = {row["mode"] for row in bundle.exponents}
    assert modes == {"h"}
    assert len(bundle.exponents) == 4
    assert all(abs(row["exponent"]) < 1.0 for row in bundle.exponents)
    bound = {(row["p"], row["selector"]): row["bound"] for row in bundle.exponents}
    assert bound[(2, "min")] == "M-kmax"
    assert bound[(3, "min")] == "M-k0"
    exponents = pd.read_csv(out_dir / "exponents.csv")
    assert len(exponents) == 4


def test_report_lists_failures(out_dir, mocker):
    mocker.patch.object(harness, "build_matrix", side_effect=ConfigurationError("boom", "x"))
    spec = mass_spec(out_dir, h_den=[2, 3])
    ledger = harness.run_sweep(spec, workers=1, progress=False)
    bundle = harness.emit_report(ledger, spec)
    assert bundle.summary == ""
    assert len(ledger.failed) == 2
