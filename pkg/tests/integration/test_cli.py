import json
from pathlib import Path
from typing import Any
from unittest.mock import MagicMock

import pytest

from maxformer.core.models import Criterion, DomainBox, SpecDims, VerificationReport
from maxformer.core.services.netspec_io import random_spec
from maxformer.infrastructure.repositories import SpecRepository
from maxformer.main import EXIT_FAILED, EXIT_IO, EXIT_PASS, EXIT_PRECONDITION, EXIT_SHAPE, main


def _write_spec(path: Path, kind: str, seed: int = 1, **dims: int) -> Path:
    SpecRepository().save(random_spec(kind, SpecDims(**dims), 1.0, seed), path)  # type: ignore[arg-type]
    return path


def _stdout_report(capsys: pytest.CaptureFixture[str]) -> dict[str, Any]:
    document: dict[str, Any] = json.loads(capsys.readouterr().out)
    return document


@pytest.fixture
def domain(tmp_path: Path) -> Path:
    path = tmp_path / "domain.json"
    SpecRepository().save(DomainBox(a=-1.0, b=1.0, n=1, T=2), path)
    return path


@pytest.fixture
def compiled(tmp_path: Path, domain: Path) -> tuple[Path, Path]:
    """A deep maxout spec and its compiled weights"""
    spec = _write_spec(tmp_path / "spec.json", "deep_maxout", n=1, T=2, p=2, m=1, D=2)
    net = tmp_path / "net.json"
    code = main(["compile", "--spec", str(spec), "--domain", str(domain), "--out", str(net),
                 "--report", str(tmp_path / "compile.json")])
    assert code == EXIT_PASS
    return spec, net


class TestCompileAndVerify:
    """End-to-end compile and verify runs"""

    def test_compile_report(self, compiled: tuple[Path, Path], tmp_path: Path) -> None:
        """Test that compile writes weights and a within-budget report"""
        _, net = compiled
        document = json.loads((tmp_path / "compile.json").read_text())

        assert net.exists()
        assert document["kind"] == "compile"
        assert document["report"]["audit"]["within_budget"] is True
        assert document["report"]["audit"]["theorem_id"] == "deep_pleT"

    def test_verify_hardmax(
        self, compiled: tuple[Path, Path], domain: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that the compiled net verifies against its spec"""
        spec, net = compiled
        capsys.readouterr()
        code = main(["verify", "--net", str(net), "--spec", str(spec), "--domain", str(domain), "--samples", "200"])

        assert code == EXIT_PASS
        assert _stdout_report(capsys)["report"]["passed"] is True

    def test_verify_box_from_net(self, compiled: tuple[Path, Path], capsys: pytest.CaptureFixture[str]) -> None:
        """Test that --domain may be omitted for compiled nets"""
        spec, net = compiled
        assert main(["verify", "--net", str(net), "--spec", str(spec), "--samples", "100"]) == EXIT_PASS

    def test_verify_softmax(self, compiled: tuple[Path, Path], capsys: pytest.CaptureFixture[str]) -> None:
        """Test a single-lambda softmax check"""
        spec, net = compiled
        capsys.readouterr()
        code = main(["verify", "--net", str(net), "--spec", str(spec), "--mode", "softmax", "--lam", "1e4",
                     "--tol", "10", "--samples", "100"])

        assert code == EXIT_PASS
        assert _stdout_report(capsys)["report"]["notes"] == "lambda=10000.0"

    def test_failed_check_exits_one(
        self, compiled: tuple[Path, Path], monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that a failing report gives exit status 1"""
        spec, net = compiled
        verifier = MagicMock()
        verifier.check_exact_equivalence.return_value = VerificationReport(
            max_abs_error=1.0, criterion=Criterion.RELATIVE, samples=1, seed=0, passed=False
        )
        monkeypatch.setattr("maxformer.cli.commands.verify.get_verifier", lambda threads=None: verifier)

        assert main(["verify", "--net", str(net), "--spec", str(spec)]) == EXIT_FAILED
        verifier.check_exact_equivalence.assert_called_once()

    def test_sweep(self, tmp_path: Path, domain: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a shallow net's softmax error decays like 1/lambda"""
        spec = _write_spec(tmp_path / "layer.json", "maxout_layer", 2, n=1, T=2, p=2, m=1)
        net = tmp_path / "layer_net.json"
        assert main(["compile", "--spec", str(spec), "--domain", str(domain), "--out", str(net)]) == EXIT_PASS
        capsys.readouterr()

        code = main(["sweep", "--net", str(net), "--spec", str(spec), "--samples", "500"])
        sweep = _stdout_report(capsys)["report"]
        assert code == EXIT_PASS
        assert sweep["lambdas"] == [1e2, 1e3, 1e4, 1e5]
        assert sweep["fitted_slope"] <= -0.9


class TestRegionsAndBounds:
    """Region counting and bound formulas from the command line"""

    def test_regions_of_spec(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test counting on a slice through a spec's oracle"""
        spec = _write_spec(tmp_path / "spec.json", "maxout_layer", n=1, T=2, p=2, m=1)
        slc = tmp_path / "slice.json"
        slc.write_text(json.dumps({"base": [[0.0, 0.0]], "dirs": [[[1.0, 0.0]]], "extent": [[-1.0, 1.0]]}))

        assert main(["regions", "--spec", str(spec), "--slice", str(slc)]) == EXIT_PASS
        report = _stdout_report(capsys)["report"]
        assert report["method"] == "exact_1d"
        assert report["count"] == 1 + len(report["breakpoints"])
        assert report["lower_bound_formula"] == 4

    def test_transformer_bound(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the Transformer bound for n=1, m=1, T=2, D=6, q=1"""
        code = main(["bounds", "--kind", "transformer", "--n", "1", "--m", "1", "--T", "2", "--D", "6", "--q", "1"])
        assert code == EXIT_PASS
        assert _stdout_report(capsys)["report"]["value"] == 9

    def test_maxout_bound(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the maxout bound for widths 2,1 and rank 2"""
        code = main(["bounds", "--kind", "maxout", "--n0", "1", "--widths", "2,1", "--k", "2", "--n", "1"])
        report = _stdout_report(capsys)["report"]
        assert code == EXIT_PASS
        assert report["value"] == 6
        assert report["parameters"]["widths"] == [2, 1]

    def test_odd_ratio(self) -> None:
        """Test that mT/q must be even"""
        code = main(["bounds", "--kind", "transformer", "--n", "1", "--m", "3", "--T", "2", "--D", "6", "--q", "2"])
        assert code == EXIT_PRECONDITION


class TestExitCodes:
    """Error paths and their exit statuses"""

    def test_missing_file(self, tmp_path: Path, domain: Path) -> None:
        """Test that an unreadable spec exits 2"""
        code = main(["compile", "--spec", str(tmp_path / "absent.json"), "--domain", str(domain),
                     "--out", str(tmp_path / "net.json")])
        assert code == EXIT_IO

    def test_missing_flag(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a missing required flag exits 2 and names it"""
        assert main(["compile", "--spec", str(tmp_path / "spec.json")]) == EXIT_IO
        assert "--domain, --out" in capsys.readouterr().err

    def test_softmax_needs_lambda(self, compiled: tuple[Path, Path]) -> None:
        """Test that softmax verification requires --lam"""
        spec, net = compiled
        assert main(["verify", "--net", str(net), "--spec", str(spec), "--mode", "softmax"]) == EXIT_IO

    def test_box_as_spec(self, tmp_path: Path, domain: Path) -> None:
        """Test that a domain file passed as --spec is a parse error"""
        code = main(["compile", "--spec", str(domain), "--domain", str(domain), "--out", str(tmp_path / "n.json")])
        assert code == EXIT_IO

    def test_shape_mismatch(self, tmp_path: Path, domain: Path) -> None:
        """Test that a spec reading the wrong input dimension exits 3"""
        spec = _write_spec(tmp_path / "wide.json", "maxout_layer", n=2, T=2, p=2, m=1)
        code = main(["compile", "--spec", str(spec), "--domain", str(domain), "--out", str(tmp_path / "n.json")])
        assert code == EXIT_SHAPE

    def test_zero_tolerance(self, compiled: tuple[Path, Path]) -> None:
        """Test that a nonpositive tolerance exits 4"""
        spec, net = compiled
        assert main(["verify", "--net", str(net), "--spec", str(spec), "--tol", "0"]) == EXIT_PRECONDITION

    def test_delta_out_of_range(self, tmp_path: Path, domain: Path) -> None:
        """Test that an oversized shift delta exits 4"""
        spec = _write_spec(tmp_path / "deep.json", "deep_maxout", n=1, T=2, p=2, m=1, D=2)
        code = main(["compile", "--spec", str(spec), "--domain", str(domain), "--out", str(tmp_path / "n.json"),
                     "--deltas", "100"])
        assert code == EXIT_PRECONDITION
