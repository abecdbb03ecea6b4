#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Database Session
--------------------------
Engine and session management for the results store. DATABASE_URL selects the
backend; otherwise a SQLite file is used.
"""

import os
from contextlib import contextmanager
from pathlib import Path

from sqlalchemy import create_engine, event, text
from sqlalchemy.orm import scoped_session, sessionmaker
from sqlalchemy.pool import StaticPool

from db.models import Base
from utils.logger import get_logger

DEFAULT_DB_FILE = "hiernav_results.db"

engine = None
Session = None
logger = get_logger("hiernav.db")


def resolve_database_url(url=None, directory=None):
    """
    Pick the database URL: explicit argument, then DATABASE_URL, then SQLite

    Args:
        url (str, optional): Explicit SQLAlchemy URL
        directory (str | Path, optional): Where the SQLite fallback file goes

    Returns:
        str: SQLAlchemy URL
    """
    if url:
        return url
    env_url = os.getenv("DATABASE_URL")
    if env_url:
        return env_url
    path = Path(directory or ".") / DEFAULT_DB_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    return f"sqlite:///{path}"


def create_sqlite_engine(url):
    """SQLite engine usable from the benchmark worker threads"""
    kwargs = {"connect_args": {"check_same_thread": False}}
    if url in ("sqlite://", "sqlite:///:memory:"):
        kwargs["poolclass"] = StaticPool
    sqlite_engine = create_engine(url, **kwargs)

    @event.listens_for(sqlite_engine, "connect")
    def set_sqlite_pragma(dbapi_connection, connection_record):
        cursor = dbapi_connection.cursor()
        cursor.execute("PRAGMA foreign_keys=ON")
        cursor.execute("PRAGMA synchronous=NORMAL")
        cursor.close()

    return sqlite_engine


def init_db(url=None, directory=None):
    """
    Create the engine, the tables and the session factory

    Returns:
        sqlalchemy.Engine: The active engine
    """
    global engine, Session

    url = resolve_database_url(url, directory)
    if url.startswith("sqlite"):
        engine = create_sqlite_engine(url)
    else:
        engine = create_engine(url, pool_pre_ping=True)

    with engine.connect() as conn:
        conn.execute(text("SELECT 1"))
    Base.metadata.create_all(engine)
    Session = scoped_session(sessionmaker(bind=engine, expire_on_commit=False))
    logger.info(f"Results store ready ({engine.dialect.name})")
    return engine


def get_session():
    if Session is None:
        init_db()
    return Session()


@contextmanager
def session_scope():
    """
    Session that commits on success and rolls back on error

    Yields:
        sqlalchemy.orm.Session: Database session
    """
    session = get_session()
    try:
        yield session
        session.commit()
    except Exception as e:
        logger.error(f"Error in database session: {e}")
        session.rollback()
        raise
    finally:
        session.close()


def close_db():
    """Dispose the engine and forget the session factory"""
    global engine, Session
    if Session is not None:
        Session.remove()
    if engine is not None:
        engine.dispose()
    engine = None
    Session = None


def check_database_health():
    """
    Returns:
        dict: status ("healthy" / "unhealthy"), engine type, table count, last error
    """
    health = {"status": "unhealthy", "engine_type": "unknown", "tables": 0, "last_error": None}
    if engine is None:
        health["last_error"] = "Database engine not initialized"
        return health
    try:
        health["engine_type"] = engine.dialect.name
        with engine.connect() as conn:
            conn.execute(text("SELECT 1"))
        health["tables"] = len(Base.metadata.tables)
        health["status"] = "healthy"
    except Exception as e:
        health["last_error"] = str(e)
        logger.error(f"Database health check failed: {e}")
    return health
