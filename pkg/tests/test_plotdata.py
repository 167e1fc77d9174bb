import json

import pandas as pd
import pytest

from src.exceptions import ConfigError
from src.plotdata import AggregationFactory, NoAggregation, PlotSpec, extract, plotdata


@pytest.fixture
def results():
    return pd.DataFrame(
        {
            "N": [2, 2, 3],
            "seed": [0, 1, 0],
            "distance": [0.5, 0.25, 0.1],
        }
    )


def test_mean_per_group(results):
    table = extract(results, PlotSpec(["distance"], ["N"], "mean"))
    assert list(table.columns) == ["N", "distance"]
    assert table["distance"].tolist() == pytest.approx([0.375, 0.1])


def test_count_per_group(results):
    table = extract(results, PlotSpec(["seed"], ["N"], "count"))
    assert table["seed"].tolist() == [2, 1]


def test_aggregate_without_groups(results):
    table = extract(results, PlotSpec(["distance"], [], "max"))
    assert len(table) == 1
    assert table["distance"].iloc[0] == pytest.approx(0.5)


def test_no_aggregation_orders_by_group(results):
    table = extract(results.iloc[::-1], PlotSpec(["distance"], ["N"]))
    assert table["N"].tolist() == [2, 2, 3]
    assert len(table) == 3


def test_empty_input_keeps_header():
    empty = pd.DataFrame(columns=["N", "distance"])
    table = extract(empty, PlotSpec(["distance"], ["N"], "mean"))
    assert table.empty
    assert list(table.columns) == ["N", "distance"]


def test_unknown_column_is_rejected(results):
    with pytest.raises(ConfigError, match="gap"):
        extract(results, PlotSpec(["gap"]))


def test_spec_validation():
    assert PlotSpec.from_json({"columns": ["a"]}).aggregate == "none"
    with pytest.raises(ConfigError):
        PlotSpec.from_json({"columns": ["a"], "colour": "red"})
    with pytest.raises(ConfigError):
        PlotSpec.from_json({"group_by": ["a"]})
    with pytest.raises(ConfigError):
        PlotSpec.from_json({"columns": ["a"], "aggregate": "median"})
    assert isinstance(AggregationFactory.get_strategy("none"), NoAggregation)


def test_plotdata_from_files(tmp_path, results):
    csv_path = tmp_path / "results.csv"
    results.to_csv(csv_path, index=False)
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"columns": ["distance"], "group_by": ["N"], "aggregate": "min"}))
    table = plotdata(str(csv_path), str(spec_path))
    assert table["distance"].tolist() == pytest.approx([0.25, 0.1])
