import json
import math
import time
import xml.etree.ElementTree as ElementTree
from fractions import Fraction

import numpy as np
import pytest

from ccs import (
    RunConfig,
    SampleTrace,
    SchemaError,
    TraceFormatError,
    analyze_trace,
    read_design,
    read_distribution,
    read_report,
    read_trace,
    render_svg,
    report_credible_set,
    write_design,
    write_distribution,
    write_report,
    write_trace,
    gen_george_mcculloch,
    ExplicitDistribution,
)
from ccs.io_report import SvgStyle


class TestTraceFiles:
    def test_minimal_text_trace(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n1,0\n")
        trace = read_trace(path)
        assert trace.n_samples == 1 and trace.n_variables == 2
        assert trace.matrix.tolist() == [[1, 0]]

    def test_text_round_trip(self, tmp_path, gm_trace):
        path = tmp_path / "trace.csv"
        write_trace(gm_trace, path, fmt="text")
        assert read_trace(path) == gm_trace

    def test_binary_round_trip(self, tmp_path, gm_trace):
        path = tmp_path / "trace.bin"
        write_trace(gm_trace, path, fmt="binary")
        assert read_trace(path) == gm_trace

    def test_binary_smaller_than_text(self, tmp_path, gm_trace):
        t, b = tmp_path / "a.csv", tmp_path / "a.bin"
        write_trace(gm_trace, t, fmt="text")
        write_trace(gm_trace, b, fmt="binary")
        assert b.stat().st_size < t.stat().st_size / 5

    def test_ragged_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,0\n1\n0,1\n")
        with pytest.raises(TraceFormatError, match=":3"):
            read_trace(path)

    def test_non_binary_entry_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,0\n1,2\n")
        with pytest.raises(TraceFormatError, match=":3"):
            read_trace(path)

    def test_windows_line_endings(self, tmp_path):
        path = tmp_path / "crlf.csv"
        path.write_bytes(b"a,b\r\n1,0\r\n0,1\r\n")
        trace = read_trace(path)
        assert trace.matrix.tolist() == [[1, 0], [0, 1]]

    def test_large_trace_parses_quickly(self, tmp_path):
        rng = np.random.default_rng(0)
        matrix = (rng.random((100_000, 69)) < 0.2).astype(np.uint8)
        trace = SampleTrace(matrix, [f"s{i}" for i in range(69)])
        path = tmp_path / "big.csv"
        write_trace(trace, path, fmt="text")
        start = time.perf_counter()
        loaded = read_trace(path)
        elapsed = time.perf_counter() - start
        assert np.array_equal(loaded.matrix, matrix)
        assert elapsed < 2.0


class TestDesignFiles:
    def test_round_trip(self, tmp_path):
        data = gen_george_mcculloch(25, 2.5, seed=1)
        path = tmp_path / "design.csv"
        write_design(data.y, data.X, data.labels, path, comments=["demo"])
        y, X, labels = read_design(path)
        assert np.array_equal(y, data.y)
        assert np.array_equal(X, data.X)
        assert labels == data.labels

    def test_header_validation(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2\n1.0,2.0\n")
        with pytest.raises(ValueError):
            read_design(path)


class TestReport:
    def test_round_trip_equality(self, tmp_path, gm_report):
        path = tmp_path / "report.json"
        write_report(gm_report, path)
        assert read_report(path) == gm_report

    def test_masses_are_exact_rationals(self, gm_report):
        cs = gm_report.credible_set
        n = gm_report.n_samples
        for block in cs.blocks:
            for sub in block.submodels:
                num, den = sub.mass
                assert Fraction(num, den) == Fraction(
                    int(round(Fraction(num, den) * n)), n
                )

    def test_log_mass_reconstructs(self, gm_report):
        cs = gm_report.credible_set
        total = sum(
            math.log(b.pi[0]) - math.log(b.pi[1]) for b in cs.blocks
        )
        assert cs.log_mass == pytest.approx(total, abs=1e-12)

    def test_schema_mismatch(self, tmp_path, gm_report):
        path = tmp_path / "report.json"
        write_report(gm_report, path)
        data = json.loads(path.read_text())
        data["schema"] = "ccs_report_v0"
        path.write_text(json.dumps(data))
        with pytest.raises(SchemaError):
            read_report(path)

    def test_empty_retained_run_carries_error_status(self, tmp_path):
        trace = SampleTrace(np.zeros((50, 3), dtype=np.uint8), ["a", "b", "c"])
        report = analyze_trace(trace, RunConfig())
        assert report.status == "empty-retained-set"
        assert report.credible_set is None
        assert len(report.screened_out) == 3
        path = tmp_path / "err.json"
        write_report(report, path)
        assert read_report(path).status == "empty-retained-set"

    def test_credible_set_reconstruction(self, gm_report):
        cs = report_credible_set(gm_report)
        product = Fraction(1)
        for bset in cs.blocks:
            product *= bset.pi
        assert cs.mass == product
        assert math.exp(cs.log_mass) >= 0.5 - 1e-12

    def test_screened_variables_not_in_blocks(self, gm_report):
        screened = {s.index for s in gm_report.screened_out}
        for block in gm_report.credible_set.blocks:
            assert not (set(block.indices) & screened)


class TestRunConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig(level=0.0)
        with pytest.raises(ValueError):
            RunConfig(level=1.5)
        with pytest.raises(ValueError):
            RunConfig(penalty_scale=0)
        with pytest.raises(ValueError):
            RunConfig(screen_tau=1.0)
        with pytest.raises(ValueError):
            RunConfig(sign_mode="bogus")


class TestRenderSvg:
    def _tiny_report(self):
        trace = SampleTrace(np.ones((10, 1), dtype=np.uint8), ["a"])
        return analyze_trace(trace, RunConfig())

    def test_minimal_report_is_valid_xml(self):
        svg = render_svg(self._tiny_report())
        root = ElementTree.fromstring(svg)
        assert root.tag.endswith("svg")

    def test_gm_report_structure(self, gm_report):
        svg = render_svg(gm_report)
        root = ElementTree.fromstring(svg)
        ns = "{http://www.w3.org/2000/svg}"
        bars = [
            el
            for el in root.iter(f"{ns}rect")
            if el.get("fill") == "#000000"
        ]
        texts = [el.text for el in root.iter(f"{ns}text")]
        cs = gm_report.credible_set
        assert len(bars) == len(cs.blocks)
        boxes = sum(len(b.labels) for b in cs.blocks)
        assert boxes == len(gm_report.retained) == 13
        # screened variables 7 and 8 never appear
        assert "x7" not in texts and "x8" not in texts

    def test_byte_identical_given_same_report(self, tmp_path, gm_report):
        a = render_svg(gm_report, tmp_path / "a.svg")
        b = render_svg(gm_report, tmp_path / "b.svg")
        assert a == b
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_style_override_changes_output(self, gm_report):
        default = render_svg(gm_report)
        styled = render_svg(gm_report, style=SvgStyle(cell=30))
        assert default != styled

    def test_error_report_renders_notice(self):
        trace = SampleTrace(np.zeros((5, 2), dtype=np.uint8), ["a", "b"])
        report = analyze_trace(trace, RunConfig())
        svg = render_svg(report)
        assert "no variables retained" in svg


class TestDistributionFiles:
    def test_round_trip(self, tmp_path):
        dist = ExplicitDistribution.from_mapping(
            {"001": Fraction(9, 20), "010": Fraction(9, 20), "101": Fraction(1, 10)}
        )
        path = tmp_path / "dist.json"
        write_distribution(dist, path)
        loaded = read_distribution(path)
        assert dict(loaded.atoms) == dict(dist.atoms)

    def test_schema_enforced(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": "nope", "atoms": {}}))
        with pytest.raises(SchemaError):
            read_distribution(path)
