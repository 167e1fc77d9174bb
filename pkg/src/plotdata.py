import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List

import pandas as pd

from src.exceptions import ConfigError
from src.result_io import read_table

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


@dataclass(frozen=True)
class PlotSpec:
    """Column selection, grouping keys and aggregation for one tidy extract."""

    columns: List[str]
    group_by: List[str] = field(default_factory=list)
    aggregate: str = "none"

    @classmethod
    def from_json(cls, payload: dict) -> "PlotSpec":
        if not isinstance(payload, dict):
            raise ConfigError("Plot spec must be a JSON object.")
        unknown = sorted(set(payload) - {"columns", "group_by", "aggregate"})
        if unknown:
            raise ConfigError(f"Unknown plot spec keys: {unknown}")
        if "columns" not in payload:
            raise ConfigError("Missing required plot spec keys: ['columns']")
        columns, group_by = payload["columns"], payload.get("group_by", [])
        if not isinstance(columns, list) or not isinstance(group_by, list):
            raise ConfigError("Plot spec 'columns' and 'group_by' must be lists.")
        aggregate = payload.get("aggregate", "none")
        if aggregate not in AggregationFactory.STRATEGIES:
            raise ConfigError(f"Invalid plot spec field 'aggregate': {aggregate!r} not in {sorted(AggregationFactory.STRATEGIES)}")
        return cls([str(c) for c in columns], [str(g) for g in group_by], aggregate)


# Abstract Base Class for Aggregation Strategy
class AggregationStrategy(ABC):
    @abstractmethod
    def apply(self, df: pd.DataFrame, spec: PlotSpec) -> pd.DataFrame:
        """Reduces the selected columns of df according to spec."""
        pass


class NoAggregation(AggregationStrategy):
    """Keeps every row; grouping only orders rows."""

    def apply(self, df: pd.DataFrame, spec: PlotSpec) -> pd.DataFrame:
        selected = df[spec.group_by + [c for c in spec.columns if c not in spec.group_by]]
        if spec.group_by:
            selected = selected.sort_values(spec.group_by, kind="stable")
        return selected.reset_index(drop=True)


class GroupAggregation(AggregationStrategy):
    def __init__(self, how: str):
        self.how = how

    def apply(self, df: pd.DataFrame, spec: PlotSpec) -> pd.DataFrame:
        values = [c for c in spec.columns if c not in spec.group_by]
        if not spec.group_by:
            reduced = df[values].agg(self.how).to_frame().T
            return reduced.reset_index(drop=True)
        grouped = df[spec.group_by + values].groupby(spec.group_by, sort=True)
        return grouped.agg(self.how).reset_index()


class AggregationFactory:
    STRATEGIES = {"none", "mean", "min", "max", "count"}

    @staticmethod
    def get_strategy(how: str) -> AggregationStrategy:
        if how not in AggregationFactory.STRATEGIES:
            raise ConfigError(f"Unsupported aggregation: {how}")
        return NoAggregation() if how == "none" else GroupAggregation(how)


def extract(df: pd.DataFrame, spec: PlotSpec) -> pd.DataFrame:
    """
    Tidy extract of a results table.

    Parameters:
    df (pd.DataFrame): Results produced by a run.
    spec (PlotSpec): Columns, grouping and aggregation.

    Returns:
    pd.DataFrame: Group keys followed by the requested columns.
    """
    unknown = [c for c in spec.group_by + spec.columns if c not in df.columns]
    if unknown:
        logging.error(f"Unknown columns {unknown}; available: {list(df.columns)}")
        raise ConfigError(f"Unknown columns {unknown}; available: {list(df.columns)}")
    ordered = spec.group_by + [c for c in spec.columns if c not in spec.group_by]
    if df.empty:
        return pd.DataFrame(columns=ordered)
    return AggregationFactory.get_strategy(spec.aggregate).apply(df, spec)


def plotdata(results_csv: str, spec_path: str) -> pd.DataFrame:
    try:
        with open(spec_path, "r", encoding="utf-8") as handle:
            spec = PlotSpec.from_json(json.load(handle))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Plot spec {spec_path} is not valid JSON: {e}")
    table = read_table(results_csv)
    logging.info(f"Extracting {spec.columns} from {results_csv} ({len(table)} rows, aggregate={spec.aggregate}).")
    return extract(table, spec)
