import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from maxformer.core.validation import RepositoryError

logger = logging.getLogger(__name__)


def report_document(kind: str, payload: Any, schema_version: int) -> dict[str, Any]:
    """Versioned report object; ``timestamp`` is the only field that varies between identical runs"""
    body = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
    return {
        "schema_version": schema_version,
        "kind": kind,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "report": body,
    }


class ReportRepository:
    """JSON report sink"""

    def __init__(self, schema_version: int = 1):
        self.schema_version = schema_version

    def write(self, kind: str, payload: Any, path: Path) -> None:
        """
        Write a report with schema_version, kind and timestamp fields.

        Raises:
            RepositoryError: If the file cannot be written
        """
        document = report_document(kind, payload, self.schema_version)
        try:
            Path(path).write_text(json.dumps(document, indent=2, allow_nan=False) + "\n", encoding="utf-8")
        except (OSError, ValueError) as exc:
            raise RepositoryError(str(path), f"cannot write report: {exc}") from exc
        logger.debug("wrote %s report to %s", kind, path)
