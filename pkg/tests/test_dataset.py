import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaledvr.dataset import (
    Dataset,
    ScalingSpec,
    SparseRow,
    corrupt_features,
    normalize_labels,
    parse_libsvm,
    write_libsvm,
)
from scaledvr.errors import LabelCardinalityError, ParseError
from scaledvr.losses import LossKind


def parse(text, d=None):
    return parse_libsvm(io.StringIO(text), d=d)


def test_parse_basic_line():
    data = parse("+1 1:0.5 3:2\n")
    assert data.n == 1 and data.d == 3
    row = data.row(0)
    assert row.indices.tolist() == [0, 2]
    assert row.values.tolist() == [0.5, 2.0]
    assert data.labels[0] == 1.0


def test_parse_label_only_line():
    data = parse("-1\n+1 2:1\n")
    assert data.row(0).nnz == 0
    assert data.labels.tolist() == [-1.0, 1.0]


def test_parse_preserves_sparsity():
    text = "1 1:1 5:2\n-1 2:3\n1\n"
    data = parse(text)
    assert data.nnz == 3  # one stored value per index:value token


def test_parse_nonmonotone_indices():
    with pytest.raises(ParseError) as exc:
        parse("+1 3:1 2:1\n")
    assert exc.value.line == 1
    assert "strictly increasing" in str(exc.value)


def test_parse_duplicate_index():
    with pytest.raises(ParseError):
        parse("+1 2:1 2:5\n")


def test_parse_bad_value_has_position():
    with pytest.raises(ParseError) as exc:
        parse("+1 1:0.5\n-1 2:abc\n")
    assert exc.value.line == 2
    assert exc.value.column == 4


def test_parse_bad_label():
    with pytest.raises(ParseError) as exc:
        parse("one 1:2\n")
    assert exc.value.line == 1 and exc.value.column == 1


def test_parse_missing_colon():
    with pytest.raises(ParseError):
        parse("+1 17\n")


def test_parse_zero_index_rejected():
    with pytest.raises(ParseError):
        parse("+1 0:1\n")


def test_parse_empty_stream():
    with pytest.raises(ParseError):
        parse("\n  \n")


def test_parse_d_override():
    data = parse("+1 1:1\n", d=10)
    assert data.d == 10
    with pytest.raises(ValueError):
        parse("+1 5:1\n", d=3)


@st.composite
def datasets(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    d = draw(st.integers(min_value=1, max_value=9))
    rows = []
    for _ in range(n):
        nnz = draw(st.integers(min_value=0, max_value=d))
        idx = np.sort(
            np.asarray(
                draw(
                    st.lists(
                        st.integers(min_value=0, max_value=d - 1),
                        min_size=nnz,
                        max_size=nnz,
                        unique=True,
                    )
                ),
                dtype=np.int64,
            )
        )
        vals = np.asarray(
            draw(
                st.lists(
                    st.floats(
                        min_value=-1e6,
                        max_value=1e6,
                        allow_nan=False,
                        allow_infinity=False,
                    ),
                    min_size=nnz,
                    max_size=nnz,
                )
            )
        )
        rows.append(SparseRow(idx, vals))
    labels = draw(
        st.lists(st.sampled_from([-1.0, 1.0]), min_size=n, max_size=n)
    )
    return Dataset.from_rows(rows, labels, d=d)


@given(datasets())
@settings(max_examples=40)
def test_write_parse_round_trip(data):
    buf = io.StringIO()
    write_libsvm(data, buf)
    back = parse_libsvm(io.StringIO(buf.getvalue()), d=data.d)
    assert back.n == data.n and back.d == data.d
    assert np.array_equal(back.indptr, data.indptr)
    assert np.array_equal(back.indices, data.indices)
    assert np.array_equal(back.values, data.values)  # 17 significant digits round-trip
    assert np.array_equal(back.labels, data.labels)


def test_sparse_row_validation():
    with pytest.raises(ValueError):
        SparseRow(np.array([2, 1]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        SparseRow(np.array([-1]), np.array([1.0]))
    with pytest.raises(ValueError):
        SparseRow(np.array([0]), np.array([np.inf]))


def test_normalize_logistic_passthrough():
    data = parse("+1 1:1\n-1 2:1\n")
    out = normalize_labels(data, LossKind.LOGISTIC)
    assert out.labels.tolist() == [1.0, -1.0]


def test_normalize_pm_one_to_nllsq():
    data = parse("+1 1:1\n-1 2:1\n")
    out = normalize_labels(data, LossKind.NLLSQ)
    assert out.labels.tolist() == [1.0, 0.0]


def test_normalize_order_preserving():
    data = parse("0 1:1\n2 2:1\n")
    out = normalize_labels(data, LossKind.LOGISTIC)
    assert out.labels.tolist() == [-1.0, 1.0]


def test_normalize_idempotent():
    data = parse("0 1:1\n1 2:1\n")
    once = normalize_labels(data, LossKind.NLLSQ)
    twice = normalize_labels(once, LossKind.NLLSQ)
    assert np.array_equal(once.labels, twice.labels)


def test_normalize_single_in_domain_value():
    data = parse("+1 1:1\n+1 2:1\n")
    out = normalize_labels(data, LossKind.LOGISTIC)
    assert out.labels.tolist() == [1.0, 1.0]


def test_normalize_cardinality_errors():
    with pytest.raises(LabelCardinalityError):
        normalize_labels(parse("0 1:1\n1 1:1\n2 1:1\n"), LossKind.LOGISTIC)
    with pytest.raises(LabelCardinalityError):
        normalize_labels(parse("3 1:1\n3 2:1\n"), LossKind.LOGISTIC)


def test_scaling_spec_validation():
    with pytest.raises(ValueError):
        ScalingSpec(2, 1)


def test_corrupt_identity():
    data = parse("+1 1:0.125 3:-7.5\n-1 2:3.25\n")
    out = corrupt_features(data, ScalingSpec(0, 0))
    assert out.values.tobytes() == data.values.tobytes()


def test_corrupt_two_features():
    data = parse("+1 1:1 2:1\n")
    out = corrupt_features(data, ScalingSpec(0, 3, seed=5))
    assert sorted(out.values.tolist()) == [1.0, 1000.0]


def test_corrupt_single_feature_uses_kmin():
    data = parse("+1 1:2\n")
    out = corrupt_features(data, ScalingSpec(-2, 4))
    assert out.values.tolist() == [2e-2]


def test_corrupt_deterministic():
    data = parse("+1 1:1 2:1 3:1 4:1 5:1\n")
    a = corrupt_features(data, ScalingSpec(-3, 3, seed=9))
    b = corrupt_features(data, ScalingSpec(-3, 3, seed=9))
    assert a.values.tobytes() == b.values.tobytes()


@given(st.integers(min_value=0, max_value=1000), st.integers(min_value=1, max_value=12))
@settings(max_examples=30)
def test_corrupt_exponent_multiset(seed, d):
    # one unit value per feature: corrupted values are exactly the multipliers
    rows = [SparseRow(np.array([j], dtype=np.int64), np.array([1.0])) for j in range(d)]
    data = Dataset.from_rows(rows, np.ones(d), d=d)
    out = corrupt_features(data, ScalingSpec(-2, 2, seed=seed))
    if d == 1:
        expect = np.array([1e-2])
    else:
        expect = 10.0 ** (-2 + 4 * np.arange(d) / (d - 1))
    assert np.allclose(sorted(out.values.tolist()), sorted(expect.tolist()), rtol=1e-15)
