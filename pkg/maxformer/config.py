from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    """Application settings"""

    # Worker threads for sample evaluation (MAXFORMER_THREADS)
    threads: int = Field(default=1, ge=1)

    # Verification defaults
    seed: int = 42
    tolerance: float = Field(default=1e-9, gt=0.0)
    samples: int = Field(default=1000, ge=1)

    # Extra slack on the masking offset of max-extraction heads
    alpha_margin: float = Field(default=1.0, ge=0.0)

    log_level: str = "WARNING"

    # Stamped into every JSON report
    report_schema_version: int = 1

    model_config = SettingsConfigDict(
        env_prefix="MAXFORMER_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


settings = Settings()
