import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pandemic_privacy.errors import ContractError, InvalidInputError, StateError
from pandemic_privacy.histogram import (
    Attribute,
    HistogramTree,
    TreeSpec,
    build_tree,
    consistency_h_pass,
    layer_noise_scales,
    load_leaf_counts,
    load_tree_spec,
    max_inconsistency,
    postprocess_counts,
    query_marginal,
    round_half_away,
    sanitize_tree,
    tree_rows,
    weighted_z_pass,
)
from pandemic_privacy.privacy import PrivacyBudget, RandomSource

FIG_LEAVES = [50, 30, 40, 20, 25, 15, 12, 8]


def fig_spec(allocation=None):
    return TreeSpec(
        (
            Attribute("age", ("young", "elderly")),
            Attribute("minority", ("majority", "minority")),
            Attribute("gender", ("F", "M")),
        ),
        allocation,
    )


def pair_spec():
    return TreeSpec((Attribute("g", ("a", "b")),))


def test_build_tree_sums():
    tree = build_tree(FIG_LEAVES, fig_spec())
    assert tree.true[0] == 200
    assert tree.depth == 4
    assert list(tree.true[1:3]) == [140, 60]
    assert np.all(build_tree([0, 0, 0, 0], TreeSpec((Attribute("a", "xy"), Attribute("b", "uv")))).true == 0)
    assert build_tree([3, 5], pair_spec()).true[0] == 8


def test_build_tree_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        build_tree([1, 2, 3], fig_spec())
    with pytest.raises(InvalidInputError):
        build_tree([1, -2], pair_spec())


def test_tree_paths():
    tree = build_tree(FIG_LEAVES, fig_spec())
    assert tree.path(0) == "*"
    assert tree.path(1) == "age=young"
    assert tree.path(tree.n_nodes - 1) == "age=elderly/minority=minority/gender=M"
    assert tree.height(0) == 4 and tree.height(tree.n_nodes - 1) == 1
    assert list(tree.children(1)) == [3, 4]


def test_noise_scale_uniform_allocation():
    scales = layer_noise_scales(fig_spec(), PrivacyBudget(0.5))
    assert np.allclose(scales, 8.0)


@pytest.mark.parametrize("alloc", [(0.5, 0.5), (0.5, 0.5, 0.5, -0.5), (0.1, 0.1, 0.1, 0.1)])
def test_invalid_allocation(alloc):
    tree = build_tree(FIG_LEAVES, fig_spec())
    with pytest.raises(ContractError):
        sanitize_tree(tree, PrivacyBudget(1.0), RandomSource(0), allocation=alloc)


def test_custom_allocation_scales():
    scales = layer_noise_scales(fig_spec(), PrivacyBudget(1.0), (0.1, 0.2, 0.3, 0.4))
    assert np.allclose(scales, [10, 5, 1 / 0.3, 2.5])


def test_vanishing_noise_recovers_truth():
    tree = build_tree(FIG_LEAVES, fig_spec())
    out = sanitize_tree(tree, PrivacyBudget(1e6), RandomSource(1))
    assert np.all(np.abs(out.h - tree.true) < 1e-2)


def test_z_pass_hand_example():
    tree = HistogramTree(pair_spec(), np.array([8, 3, 5]), noisy=np.array([10.0, 3.0, 5.0]))
    z = weighted_z_pass(tree).z
    assert z[0] == pytest.approx(2 / 3 * 10 + 1 / 3 * 8)
    assert z[0] == pytest.approx(9.3333333333)
    assert list(z[1:]) == [3.0, 5.0]


def test_z_pass_three_level_weights():
    # height-3 node with k=2: weights 4/7 on its own count and 3/7 on the children
    spec = TreeSpec((Attribute("a", "xy"), Attribute("b", "uv")))
    noisy = np.array([20.0, 9.0, 11.0, 4.0, 5.0, 6.0, 5.0])
    z = weighted_z_pass(HistogramTree(spec, np.array([20, 9, 11, 4, 5, 6, 5]), noisy=noisy)).z
    z1 = 2 / 3 * 9 + 1 / 3 * 9
    z2 = 2 / 3 * 11 + 1 / 3 * 11
    assert z[0] == pytest.approx(4 / 7 * 20 + 3 / 7 * (z1 + z2))


def test_h_pass_hand_example():
    tree = HistogramTree(pair_spec(), np.array([8, 3, 5]), z=np.array([10.0, 3.0, 5.0]))
    h = consistency_h_pass(tree).h
    assert list(h) == [10.0, 4.0, 6.0]


def test_zero_noise_passes_are_identity():
    tree = build_tree(FIG_LEAVES, fig_spec())
    noisy = HistogramTree(tree.spec, tree.true, noisy=tree.true.astype(float))
    out = consistency_h_pass(weighted_z_pass(noisy))
    assert np.allclose(out.z, tree.true)
    assert np.allclose(out.h, tree.true)


def test_pass_ordering_errors():
    tree = build_tree(FIG_LEAVES, fig_spec())
    with pytest.raises(StateError):
        weighted_z_pass(tree)
    with pytest.raises(StateError):
        consistency_h_pass(tree)
    with pytest.raises(StateError):
        query_marginal(tree, 0)


def test_postprocess_examples():
    tree = HistogramTree(pair_spec(), np.array([3, 0, 3]), h=np.array([2.4, -1.2, 3.6]))
    out = postprocess_counts(tree, "rounded-nonnegative")
    assert list(out.h) == [4.0, 0.0, 4.0]
    ints = HistogramTree(pair_spec(), np.array([3, 1, 2]), h=np.array([3.0, 1.0, 2.0]))
    assert list(postprocess_counts(ints, "rounded-nonnegative").h) == [3.0, 1.0, 2.0]
    assert postprocess_counts(tree, "raw") is tree


def test_round_half_away():
    assert list(round_half_away([0.5, -0.5, 1.5, 2.4, -2.6])) == [1, -1, 2, 2, -3]


def test_query_marginal():
    tree = build_tree(FIG_LEAVES, fig_spec())
    out = sanitize_tree(tree, PrivacyBudget(0.5), RandomSource(2))
    assert query_marginal(out, 0).shape == (1,)
    assert query_marginal(out, 3).shape == (8,)
    exact = sanitize_tree(tree, PrivacyBudget(1e9), RandomSource(2))
    assert np.allclose(query_marginal(exact, 1), [140, 60], atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(
    fanouts=st.lists(st.integers(2, 4), min_size=1, max_size=3),
    eps=st.floats(0.01, 10),
    seed=st.integers(0, 2**32 - 1),
    data=st.data(),
)
def test_consistency_property(fanouts, eps, seed, data):
    spec = TreeSpec(tuple(Attribute(f"a{i}", tuple(str(j) for j in range(k))) for i, k in enumerate(fanouts)))
    leaves = data.draw(st.lists(st.integers(0, 1000), min_size=spec.n_leaves, max_size=spec.n_leaves))
    out = sanitize_tree(build_tree(leaves, spec), PrivacyBudget(eps), RandomSource(seed))
    assert max_inconsistency(out) <= 1e-9
    rounded = postprocess_counts(out, "rounded-nonnegative")
    assert max_inconsistency(rounded) == 0.0
    assert np.all(rounded.h >= 0)


def _replicates(tree, eps, reps, seed):
    gen = RandomSource(seed).generator()
    return np.array([sanitize_tree(tree, PrivacyBudget(eps), gen).h for _ in range(reps)])


def test_unbiased_every_node():
    tree = build_tree(FIG_LEAVES, fig_spec())
    hs = _replicates(tree, 0.5, 10_000, 3)
    se = hs.std(axis=0, ddof=1) / np.sqrt(len(hs))
    assert np.all(np.abs(hs.mean(axis=0) - tree.true) <= 3 * se + 1e-12)


def test_leaf_error_decreases_with_epsilon():
    tree = build_tree(FIG_LEAVES, fig_spec())
    leaves = tree.layer_slice(3)
    errs = [np.abs(_replicates(tree, e, 2000, 4)[:, leaves] - tree.true[leaves]).sum(axis=1).mean() for e in (0.5, 0.3, 0.1)]
    assert errs[0] < errs[1] < errs[2]


def test_consistency_reduces_root_variance():
    tree = build_tree(FIG_LEAVES, fig_spec())
    gen = RandomSource(5).generator()
    noisy_root, h_root = [], []
    for _ in range(5000):
        out = sanitize_tree(tree, PrivacyBudget(0.5), gen)
        noisy_root.append(out.noisy[0])
        h_root.append(out.h[0])
    assert np.var(h_root) < np.var(noisy_root)


def test_tree_rows_hide_truth():
    out = sanitize_tree(build_tree(FIG_LEAVES, fig_spec()), PrivacyBudget(1.0), RandomSource(0))
    assert len(tree_rows(out)[0]) == 4
    assert len(tree_rows(out, include_truth=True)[0]) == 5


def test_load_spec_and_counts(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(fig_spec().to_dict()))
    spec = load_tree_spec(spec_path)
    assert spec == fig_spec()
    rows = ["age,minority,gender,count"]
    keys = [(a, m, g) for a in ("young", "elderly") for m in ("majority", "minority") for g in "FM"]
    for key, c in reversed(list(zip(keys, FIG_LEAVES))):
        rows.append(",".join(key) + f",{c}")
    counts_path = tmp_path / "counts.csv"
    counts_path.write_text("\n".join(rows) + "\n")
    assert list(load_leaf_counts(counts_path, spec)) == FIG_LEAVES


def test_load_errors_carry_line_numbers(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text('{\n  "attributes": [\n}\n')
    with pytest.raises(InvalidInputError, match="line 3"):
        load_tree_spec(bad_json)
    bad = tmp_path / "bad.csv"
    bad.write_text("g,count\na,1\nb,x\n")
    with pytest.raises(InvalidInputError, match="line 3"):
        load_leaf_counts(bad, pair_spec())
    dup = tmp_path / "dup.csv"
    dup.write_text("g,count\na,1\na,2\n")
    with pytest.raises(InvalidInputError, match="duplicate"):
        load_leaf_counts(dup, pair_spec())
    missing = tmp_path / "missing.csv"
    missing.write_text("g,count\na,1\n")
    with pytest.raises(InvalidInputError, match="missing"):
        load_leaf_counts(missing, pair_spec())
