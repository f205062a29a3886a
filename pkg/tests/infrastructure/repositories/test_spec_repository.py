import json
from pathlib import Path

import pytest

from maxformer.core.models import DomainBox, SpecDims
from maxformer.core.services.netspec_io import random_spec
from maxformer.core.validation import RepositoryError, SpecParseError, SpecValidationError
from maxformer.infrastructure.repositories import SpecRepository


@pytest.fixture
def repository() -> SpecRepository:
    return SpecRepository()


class TestSpecRepository:
    """Test suite for SpecRepository"""

    def test_save_and_load(self, repository: SpecRepository, tmp_path: Path) -> None:
        """Test that a saved spec loads back equal"""
        spec = random_spec("relu_net", SpecDims(n=1, T=2, m=2, D=2), 1.0, 4)
        path = tmp_path / "spec.json"
        repository.save(spec, path)
        assert repository.load(path) == spec

    def test_load_domain(self, repository: SpecRepository, tmp_path: Path) -> None:
        """Test that domain files load as boxes"""
        path = tmp_path / "domain.json"
        path.write_text('{"kind": "domain_box", "a": 0, "b": 1, "n": 2, "T": 3}')
        box = repository.load(path)
        assert isinstance(box, DomainBox)
        assert box.dim == 6

    def test_load_slice(self, repository: SpecRepository, tmp_path: Path) -> None:
        """Test reading a slice document"""
        path = tmp_path / "slice.json"
        path.write_text(
            json.dumps({"kind": "slice", "base": [[0, 0]], "dirs": [[[1, 0]], [[0, 1]]], "extent": [[-1, 1], [-1, 1]]})
        )
        slc = repository.load_slice(path)
        assert slc.dimension == 2
        assert slc.resolution == 256

    def test_missing_file(self, repository: SpecRepository, tmp_path: Path) -> None:
        """Test that unreadable files raise RepositoryError with the path"""
        path = tmp_path / "absent.json"
        with pytest.raises(RepositoryError) as exc_info:
            repository.load(path)
        assert exc_info.value.path == str(path)

    def test_errors_pass_through(self, repository: SpecRepository, tmp_path: Path) -> None:
        """Test that parse and validation errors reach the caller unchanged"""
        path = tmp_path / "spec.json"
        path.write_text('{"kind": "domain_box"')
        with pytest.raises(SpecParseError):
            repository.load(path)
        path.write_text('{"kind": "domain_box", "a": 1, "b": 0, "n": 1, "T": 2}')
        with pytest.raises(SpecValidationError):
            repository.load(path)

    def test_unwritable_path(self, repository: SpecRepository, tmp_path: Path) -> None:
        """Test that writes into a missing directory raise RepositoryError"""
        with pytest.raises(RepositoryError):
            repository.save(DomainBox(a=0.0, b=1.0, n=1, T=1), tmp_path / "missing" / "box.json")
