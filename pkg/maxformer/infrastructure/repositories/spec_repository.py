import logging
from pathlib import Path

from maxformer.core.models import AnySpec, Slice
from maxformer.core.services.netspec_io import parse_slice, parse_spec, serialize_spec
from maxformer.core.validation import RepositoryError

logger = logging.getLogger(__name__)


class SpecRepository:
    """Spec and domain documents stored as UTF-8 JSON files"""

    @staticmethod
    def _read(path: Path) -> str:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise RepositoryError(str(path), f"cannot read document: {exc}") from exc
        logger.debug("loaded document from %s", path)
        return text

    def load(self, path: Path) -> AnySpec:
        """
        Read and validate a document.

        Raises:
            RepositoryError: If the file cannot be read
            SpecParseError: If the document does not follow the schema
            SpecValidationError: If a type invariant is violated
        """
        return parse_spec(self._read(path))

    def load_slice(self, path: Path) -> Slice:
        """Read a slice document for region counting"""
        return parse_slice(self._read(path))

    def save(self, spec: AnySpec, path: Path) -> None:
        try:
            Path(path).write_text(serialize_spec(spec), encoding="utf-8")
        except OSError as exc:
            raise RepositoryError(str(path), f"cannot write spec: {exc}") from exc
        logger.debug("wrote spec to %s", path)
