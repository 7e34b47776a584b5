from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from db.models import Base
from services.config.settings import get_settings

DB_URL = get_settings().db_url
engine = create_engine(DB_URL, future=True)
SessionLocal = sessionmaker(bind=engine, autoflush=False, autocommit=False, future=True)


def init_db():
    Base.metadata.create_all(engine)


def get_db():
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
