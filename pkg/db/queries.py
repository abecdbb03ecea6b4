#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Database Queries
--------------------------
Store and read back run records and benchmark sessions
"""

import math
from typing import Any, Dict, List, Optional

import numpy as np
from sqlalchemy import desc

from db.models import BenchmarkSession, RunRecord
from db.session import session_scope
from utils.logger import get_logger

logger = get_logger("hiernav.db")


def _stat(values, fn):
    values = [v for v in values if not math.isnan(v)]
    return float(fn(values)) if values else None


def _add_run_records(session, rows, session_id=None):
    for row in rows:
        session.add(
            RunRecord(
                session_id=session_id,
                run_id=int(row["run_id"]),
                seed=int(row["seed"]),
                maze=str(row["maze"]),
                mode=str(row["mode"]),
                total_steps=int(row["total_steps"]),
                success=bool(row["success"]),
                replans=int(row["replans"]),
                subgoal_timeouts=int(row["subgoal_timeouts"]),
            )
        )


def save_run_records(rows: List[Dict[str, Any]], session_id: Optional[int] = None) -> int:
    """
    Insert metric rows

    Args:
        rows: Dicts keyed like the metrics CSV columns
        session_id: Benchmark session the rows belong to

    Returns:
        Number of rows stored
    """
    with session_scope() as session:
        _add_run_records(session, rows, session_id)
    logger.debug(f"Stored {len(rows)} run records")
    return len(rows)


def save_benchmark_session(summary, outcomes, body, base_seed=0, config=None) -> int:
    """
    Store a benchmark summary together with the metric rows of every run

    Both go in one transaction: a bad row leaves no session behind.

    Args:
        summary (BenchmarkSummary): Aggregated statistics
        outcomes (list[RunOutcome]): Per-run results
        body (str): Body the library was built for
        base_seed (int): Seed of run 0
        config (dict, optional): Configuration snapshot

    Returns:
        int: Id of the new session
    """
    rows = [row for outcome in outcomes for row in outcome.metric_rows()]
    with session_scope() as session:
        record = BenchmarkSession(
            maze=summary.maze,
            body=body,
            runs=summary.runs,
            base_seed=base_seed,
            explore_mean=_stat(summary.explore_steps, np.mean),
            explore_std=_stat(summary.explore_steps, np.std),
            goal_mean=_stat(summary.goal_steps, np.mean),
            goal_std=_stat(summary.goal_steps, np.std),
            goal_success_rate=None if math.isnan(summary.success_rate) else summary.success_rate,
            row=summary.row(),
            config=config or {},
        )
        session.add(record)
        session.flush()
        session_id = record.id
        _add_run_records(session, rows, session_id)
    logger.info(f"Benchmark session {session_id} stored for {summary.maze}")
    return session_id


def get_benchmark_sessions(maze: Optional[str] = None, limit: int = 20) -> List[Dict[str, Any]]:
    """Most recent benchmark sessions, optionally for one maze"""
    with session_scope() as session:
        query = session.query(BenchmarkSession)
        if maze:
            query = query.filter(BenchmarkSession.maze == maze)
        sessions = query.order_by(desc(BenchmarkSession.created_at), desc(BenchmarkSession.id)).limit(limit).all()
        return [s.to_dict() for s in sessions]


def get_run_records(session_id: int) -> List[Dict[str, Any]]:
    with session_scope() as session:
        records = (
            session.query(RunRecord)
            .filter(RunRecord.session_id == session_id)
            .order_by(RunRecord.run_id, RunRecord.id)
            .all()
        )
        return [r.to_dict() for r in records]
