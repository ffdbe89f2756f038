from sqlalchemy import (
    Column,
    Engine,
    Float,
    Integer,
    MetaData,
    String,
    Table,
    create_engine,
    select,
)
from sqlalchemy.engine import RowMapping
from pydantic import validate_call
from typing import List, Sequence
from .experiments import TrialRecord

TABLE_NAME = "trial_records"


def sqlite_url(path: str) -> str:
    return f"sqlite:///{path}"


class ResultStore:
    """SQLite sink for trial records, one column per record field."""

    path: str
    engine: Engine
    metadata: MetaData
    table: Table

    @validate_call
    def __init__(self, path: str):
        self.path = path
        self.engine = create_engine(sqlite_url(path))
        self.metadata = MetaData()
        self.table = Table(
            TABLE_NAME,
            self.metadata,
            Column("id", Integer, primary_key=True, autoincrement=True),
            Column("trial_id", Integer, nullable=False),
            Column("scheme", String, nullable=False),
            Column("sweep_value", Float, nullable=False),
            Column("worst_secrecy_rate_bits", Float),
            Column("p1", Float),
            Column("p2", Float),
            Column("eve_metric_db", Float),
            Column("bob_metric_db", Float),
            Column("status", String, nullable=False),
            Column("iterations", Integer, nullable=False),
            Column("runtime_ms", Float, nullable=False),
        )
        self.metadata.create_all(self.engine)

    def write(self, records: Sequence[TrialRecord]) -> int:
        """Append records in one transaction and return how many were
        written."""
        if not records:
            return 0
        rows = [r.as_dict() for r in records]
        with self.engine.begin() as connection:
            connection.execute(self.table.insert(), rows)
        return len(rows)

    def read(self) -> List[RowMapping]:
        with self.engine.connect() as connection:
            result = connection.execute(
                select(self.table).order_by(self.table.c.id)
            )
            return list(result.mappings().fetchall())
