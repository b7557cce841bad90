import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emforecast.metrics import evaluate, format_table, rank_models, table_to_csv, table_to_records

pos = st.floats(0.01, 1e4, allow_nan=False)


class TestEvaluate:
    def test_perfect(self):
        assert evaluate([11, 12], [11, 12]).values() == (0, 0, 0, 0, 0, 0)

    def test_hand_example(self):
        b = evaluate([10], [11])
        assert (b.mae, b.mse, b.rmse, b.mape_pct, b.max_error) == (1, 1, 1, 10, 1)
        assert b.smape_pct == pytest.approx(100 / 10.5, abs=1e-4)

    def test_zero_actual(self):
        b = evaluate([0.0, 1.0], [0.0, 2.0])
        assert math.isnan(b.mape_pct)
        assert b.smape_pct == pytest.approx(100 * (0 + 1 / 1.5) / 2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate([1, 2], [1])

    @given(st.lists(pos, min_size=1, max_size=20), st.data())
    def test_identities(self, actual, data):
        pred = data.draw(st.lists(pos, min_size=len(actual), max_size=len(actual)))
        b = evaluate(actual, pred)
        assert b.rmse == pytest.approx(math.sqrt(b.mse), rel=1e-12)
        assert b.max_error >= b.mae - 1e-12 and b.mse >= 0
        assert evaluate(pred, actual).smape_pct == pytest.approx(b.smape_pct, rel=1e-12)

    @given(st.lists(pos, min_size=1, max_size=20), st.floats(0.001, 1000), st.data())
    def test_joint_scaling(self, actual, c, data):
        pred = data.draw(st.lists(pos, min_size=len(actual), max_size=len(actual)))
        a, p = np.array(actual), np.array(pred)
        b1, b2 = evaluate(a, p), evaluate(c * a, c * p)
        assert b2.mae == pytest.approx(c * b1.mae, rel=1e-9)
        assert b2.rmse == pytest.approx(c * b1.rmse, rel=1e-9)
        assert b2.max_error == pytest.approx(c * b1.max_error, rel=1e-9)
        assert b2.mape_pct == pytest.approx(b1.mape_pct, rel=1e-9)
        assert b2.smape_pct == pytest.approx(b1.smape_pct, rel=1e-9)


class TestRanking:
    def test_single(self):
        rows = rank_models({"Naive": evaluate([1], [2])})
        assert rows[0].rank == 1

    def test_order_independent_of_insertion(self):
        a, b = evaluate([100], [101]), evaluate([100], [102])
        r1 = rank_models({"A": a, "B": b})
        r2 = rank_models({"B": b, "A": a})
        assert [r.model for r in r1] == [r.model for r in r2] == ["A", "B"]

    def test_ties_by_mae_then_name(self):
        b = evaluate([1, 2], [1.1, 2.2])
        rows = rank_models({"zeta": b, "alpha": b})
        assert [r.model for r in rows] == ["alpha", "zeta"]

    def test_failures_trail(self):
        rows = rank_models({"A": evaluate([1], [1])}, failures={"LSTM": "not implemented"})
        assert rows[-1].model == "LSTM" and rows[-1].rank is None
        text = table_to_csv(rows)
        assert text.splitlines()[0] == "model,MAE,MSE,RMSE,MAPE,SMAPE,MaxError,rank,note"
        assert "not implemented" in text
        assert table_to_records(rows)[1]["MAE"] is None
        assert "failed" in format_table(rows)
