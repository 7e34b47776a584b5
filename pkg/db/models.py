from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column
from sqlalchemy import String, Integer, Float, DateTime, JSON, Index
from datetime import datetime


class Base(DeclarativeBase):
    pass


class RunRecord(Base):
    """One CLI invocation: what ran, with which configuration, and how it ended"""
    __tablename__ = "runs"
    run_id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    command: Mapped[str] = mapped_column(String(32), index=True)
    seed: Mapped[int | None] = mapped_column(Integer, nullable=True)
    config_hash: Mapped[str] = mapped_column(String(64), index=True)
    phi_star: Mapped[float | None] = mapped_column(Float, nullable=True)
    timings_json: Mapped[dict] = mapped_column(JSON, default=dict)
    status: Mapped[str] = mapped_column(String(16), default="ok")
    error_code: Mapped[str] = mapped_column(String(32), default="")
    created_at: Mapped[datetime] = mapped_column(DateTime, default=datetime.utcnow)

Index("ix_runs_created", RunRecord.created_at)
