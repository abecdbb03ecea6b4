#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Database Models
-------------------------
Results store: per-phase run records and benchmark sessions
"""

import datetime

from sqlalchemy import (
    JSON,
    Boolean,
    CheckConstraint,
    Column,
    DateTime,
    Float,
    ForeignKey,
    Index,
    Integer,
    String,
)
from sqlalchemy.orm import declarative_base, relationship
from sqlalchemy.sql import func

Base = declarative_base()


class BaseModel:
    """Common serialization for every results table"""

    def to_dict(self):
        result = {}
        for column in self.__table__.columns:
            value = getattr(self, column.name)
            if isinstance(value, datetime.datetime):
                result[column.name] = value.isoformat()
            else:
                result[column.name] = value
        return result

    def __repr__(self):
        class_name = self.__class__.__name__
        attrs = [
            f"{column.name}={getattr(self, column.name)!r}"
            for column in self.__table__.columns
            if column.primary_key or column.name in ("maze", "mode")
        ]
        return f"<{class_name}({', '.join(attrs)})>"


class BenchmarkSession(Base, BaseModel):
    """One benchmark invocation with its summary statistics"""

    __tablename__ = "benchmark_sessions"

    id = Column(Integer, primary_key=True, autoincrement=True)
    maze = Column(String(64), nullable=False, index=True)
    body = Column(String(32), nullable=False)
    runs = Column(Integer, nullable=False)
    base_seed = Column(Integer, nullable=False, default=0)

    # Population statistics over runs
    explore_mean = Column(Float, nullable=True)
    explore_std = Column(Float, nullable=True)
    goal_mean = Column(Float, nullable=True)
    goal_std = Column(Float, nullable=True)
    goal_success_rate = Column(Float, nullable=True)
    row = Column(String(128), nullable=False)

    config = Column(JSON, nullable=False, default=dict)
    created_at = Column(DateTime(timezone=True), default=func.now(), nullable=False)

    records = relationship("RunRecord", back_populates="session", cascade="all, delete-orphan")

    __table_args__ = (
        CheckConstraint("runs >= 1", name="runs_positive"),
        Index("idx_benchmark_maze_created", "maze", "created_at"),
    )


class RunRecord(Base, BaseModel):
    """One phase of one run: an exploration or a single goal episode"""

    __tablename__ = "run_records"

    id = Column(Integer, primary_key=True, autoincrement=True)
    session_id = Column(
        Integer,
        ForeignKey("benchmark_sessions.id", ondelete="CASCADE"),
        nullable=True,
        index=True,
    )
    run_id = Column(Integer, nullable=False)
    seed = Column(Integer, nullable=False)
    maze = Column(String(64), nullable=False, index=True)
    mode = Column(String(16), nullable=False)
    total_steps = Column(Integer, nullable=False, default=0)
    success = Column(Boolean, nullable=False, default=False)
    replans = Column(Integer, nullable=False, default=0)
    subgoal_timeouts = Column(Integer, nullable=False, default=0)
    created_at = Column(DateTime(timezone=True), default=func.now(), nullable=False)

    session = relationship("BenchmarkSession", back_populates="records")

    __table_args__ = (
        CheckConstraint("total_steps >= 0", name="steps_non_negative"),
        Index("idx_record_maze_mode", "maze", "mode"),
    )
