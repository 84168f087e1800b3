import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rscn.errors import ContractViolationError
from rscn.model import (
    BLOCK_LOWER_TRIANGULAR,
    ReservoirModel,
    load_model,
    model_from_dict,
    model_to_dict,
    readout,
    run_reservoir,
    save_model,
)


def make_model(w_in, w_r, b, w_out, **kw):
    return ReservoirModel(
        input_weights=np.asarray(w_in, dtype=float),
        feedback=np.asarray(w_r, dtype=float),
        biases=np.asarray(b, dtype=float),
        readout=np.asarray(w_out, dtype=float),
        **kw,
    )


class TestRunReservoir:
    def test_all_zero_weights_give_zero_states(self):
        model = make_model(np.zeros((3, 2)), np.zeros((3, 3)), np.zeros(3), np.zeros((1, 5)))
        rng = np.random.default_rng(1)
        seq = run_reservoir(model, rng.uniform(-1, 1, (2, 20)))
        assert np.all(seq.states == 0.0)

    def test_single_step_closed_form(self):
        model = make_model([[1.0]], [[0.0]], [0.0], [[0.0, 0.0]])
        seq = run_reservoir(model, np.array([[0.5]]))
        assert seq.states[0, 0] == pytest.approx(0.46211715726000974, abs=1e-12)

    def test_two_step_recurrence_matches_hand_unroll(self):
        # oracle: x1 = tanh(0.5), x2 = tanh(0.5 + 0.5 * x1)
        model = make_model([[1.0]], [[0.5]], [0.0], [[0.0, 0.0]])
        seq = run_reservoir(model, np.array([[0.5, 0.5]]))
        assert seq.states[0, 1] == pytest.approx(0.6237125498258757, abs=1e-12)

    def test_extended_stacks_states_over_inputs(self):
        rng = np.random.default_rng(7)
        model = make_model(
            rng.normal(size=(3, 2)), rng.normal(size=(3, 3)) * 0.2, rng.normal(size=3),
            np.zeros((1, 5)),
        )
        u = rng.uniform(-1, 1, (2, 9))
        seq = run_reservoir(model, u)
        assert np.array_equal(seq.extended[:3], seq.states)
        assert np.array_equal(seq.extended[3:], u)

    def test_deterministic_bit_identical(self):
        rng = np.random.default_rng(3)
        model = make_model(
            rng.normal(size=(4, 2)), rng.normal(size=(4, 4)) * 0.1, rng.normal(size=4),
            np.zeros((1, 6)),
        )
        u = rng.uniform(-1, 1, (2, 50))
        x0 = rng.uniform(-1, 1, 4)
        a = run_reservoir(model, u, x0)
        b = run_reservoir(model, u, x0)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.extended, b.extended)

    def test_tanh_states_stay_in_open_unit_interval(self):
        rng = np.random.default_rng(11)
        model = make_model(
            rng.uniform(-5, 5, (6, 2)), rng.uniform(-1, 1, (6, 6)), rng.uniform(-5, 5, 6),
            np.zeros((1, 8)),
        )
        seq = run_reservoir(model, rng.uniform(-1, 1, (2, 200)))
        assert np.all(seq.states > -1.0) and np.all(seq.states < 1.0)

    def test_dimension_mismatch_raises(self):
        model = make_model([[1.0]], [[0.0]], [0.0], [[0.0, 0.0]])
        with pytest.raises(ContractViolationError):
            run_reservoir(model, np.zeros((2, 5)))
        with pytest.raises(ContractViolationError):
            run_reservoir(model, np.zeros((1, 5)), np.zeros(3))

    def test_non_finite_inputs_rejected(self):
        model = make_model([[1.0]], [[0.0]], [0.0], [[0.0, 0.0]])
        with pytest.raises(ContractViolationError):
            run_reservoir(model, np.array([[np.nan]]))


class TestReadout:
    def test_zero_readout_gives_zero_output(self):
        model = make_model(np.ones((2, 1)), np.zeros((2, 2)), np.zeros(2), np.zeros((3, 3)))
        u = np.random.default_rng(0).uniform(-1, 1, (1, 10))
        seq = run_reservoir(model, u)
        assert np.all(readout(model, seq, u) == 0.0)

    def test_input_selector_readout_reproduces_inputs(self):
        n, k = 3, 2
        w_out = np.hstack([np.zeros((k, n)), np.eye(k)])
        rng = np.random.default_rng(5)
        model = make_model(
            rng.normal(size=(n, k)), rng.normal(size=(n, n)) * 0.1, rng.normal(size=n), w_out
        )
        u = rng.uniform(-1, 1, (k, 12))
        seq = run_reservoir(model, u)
        assert np.allclose(readout(model, seq, u), u, atol=0, rtol=0)

    def test_matches_dot_product_oracle(self):
        rng = np.random.default_rng(9)
        n, k, ell = 3, 1, 2
        model = make_model(
            rng.normal(size=(n, k)), rng.normal(size=(n, n)) * 0.3, rng.normal(size=n),
            rng.normal(size=(ell, n + k)),
        )
        u = rng.uniform(-1, 1, (k, 1))
        seq = run_reservoir(model, u)
        got = readout(model, seq, u)
        ext = np.concatenate([seq.states[:, 0], u[:, 0]])
        want = np.array([np.dot(model.readout[q], ext) for q in range(ell)])
        assert np.allclose(got[:, 0], want, atol=1e-15)

    def test_dimension_mismatch_raises(self):
        model = make_model(np.ones((2, 1)), np.zeros((2, 2)), np.zeros(2), np.zeros((1, 3)))
        u = np.zeros((1, 4))
        seq = run_reservoir(model, u)
        with pytest.raises(ContractViolationError):
            readout(model, seq, np.zeros((1, 5)))


class TestStructureInvariant:
    def test_grown_rows_must_be_zero_right_of_diagonal(self):
        w_r = np.zeros((3, 3))
        w_r[0, 2] = 0.5  # initial block is 2x2, so row 0 may reach column 1 only
        with pytest.raises(ContractViolationError):
            make_model(
                np.ones((3, 1)), w_r, np.zeros(3), np.zeros((1, 4)),
                structure_tag=BLOCK_LOWER_TRIANGULAR, initial_block_size=2,
            )

    def test_valid_grown_structure_accepted(self):
        w_r = np.array([
            [0.1, 0.2, 0.0, 0.0],
            [0.3, -0.1, 0.0, 0.0],
            [0.2, 0.1, 0.4, 0.0],
            [0.0, 0.5, -0.2, 0.3],
        ])
        m = make_model(
            np.ones((4, 1)), w_r, np.zeros(4), np.zeros((1, 5)),
            structure_tag=BLOCK_LOWER_TRIANGULAR, initial_block_size=2,
        )
        assert m.n_nodes == 4

    def test_non_finite_entries_rejected(self):
        with pytest.raises(ContractViolationError):
            make_model([[np.inf]], [[0.0]], [0.0], [[0.0, 0.0]])


class TestSerialization:
    def test_round_trip_is_value_exact(self):
        rng = np.random.default_rng(13)
        model = make_model(
            rng.normal(size=(4, 2)) * 1e3,
            np.tril(rng.normal(size=(4, 4))) * 1e-7,
            rng.normal(size=4),
            rng.normal(size=(2, 6)),
            structure_tag=BLOCK_LOWER_TRIANGULAR,
            initial_block_size=4,
        )
        back = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        for name in ("input_weights", "feedback", "biases", "readout"):
            assert np.array_equal(getattr(model, name), getattr(back, name))
        assert back.activation == model.activation
        assert back.structure_tag == model.structure_tag
        assert back.initial_block_size == model.initial_block_size

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            min_size=4, max_size=4,
        )
    )
    def test_round_trip_exact_for_arbitrary_finite_doubles(self, vals):
        w_r = np.array(vals).reshape(2, 2)
        model = make_model(np.ones((2, 1)), w_r, np.zeros(2), np.zeros((1, 3)))
        back = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        assert np.array_equal(back.feedback, model.feedback)

    def test_file_round_trip(self, tmp_path):
        model = make_model([[0.5]], [[0.25]], [0.125], [[1.0, -1.0]])
        path = tmp_path / "model.json"
        save_model(model, str(path))
        back = load_model(str(path))
        assert np.array_equal(back.readout, model.readout)

    def test_unknown_version_rejected(self):
        model = make_model([[0.5]], [[0.25]], [0.125], [[1.0, -1.0]])
        doc = model_to_dict(model)
        doc["version"] = 99
        with pytest.raises(ContractViolationError):
            model_from_dict(doc)
