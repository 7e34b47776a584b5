"""
Process-level settings read from the environment (MSC_*).
"""
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class MscSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="MSC_", extra="ignore")

    log: str = "INFO"
    db_url: str = "sqlite+pysqlite:///:memory:"
    workers: int = Field(default=1, ge=1)


def get_settings() -> MscSettings:
    return MscSettings()
