"""
Tests for ground-truth mining, negative sampling and the user-disjoint split
"""

import pytest
from pydantic import ValidationError

from ovid.core.revert_miner import (
    attribute_by_deletion,
    attribute_explicit,
    convert_published,
    find_vandalism_reverts,
    mentioned_ids,
    mine_dataset,
    mine_positives,
    sample_negatives,
    split_user_disjoint,
)
from ovid.errors import InsufficientPopulation, UsageError
from ovid.models.dataset import (
    SPLIT_NAMES,
    Label,
    LabeledExample,
    Provenance,
    ProvenanceKind,
)


@pytest.mark.parametrize(
    "comment, expected",
    [
        ("Revert vandalism in changeset 12", [12]),
        ("reverted changesets 10, 11 and 12", [10, 11, 12]),
        ("see Changeset #5", [5]),
        ("changeset: 7", [7]),
        ("https://www.openstreetmap.org/changeset/9", [9]),
        ("changesets 3 & 4", [3, 4]),
        ("changeset 1 and changeset 2", [1, 2]),
        ("fixed 3 nodes", []),
        ("changesetting 5", []),
    ],
)
def test_mentioned_ids(comment, expected):
    """Integers following a changeset token are extracted in order"""
    assert mentioned_ids(comment) == expected


def test_find_reverts_case_insensitive(fixture_history, fixture_store):
    """Every changeset mentioning vandalism in any case is a revert"""
    found = [c.id for c in find_vandalism_reverts(fixture_store)]
    assert found == sorted(fixture_history.reverts)


def test_mine_positives_matches_fixture(fixture_history, fixture_store):
    """Both attribution paths recover exactly the planted vandalism"""
    positives, revert_ids = mine_positives(fixture_store)
    by_id = {p.changeset_id: p for p in positives}

    assert set(by_id) == fixture_history.positives
    assert revert_ids == set(fixture_history.reverts)
    for cid in fixture_history.explicit:
        assert by_id[cid].provenance.kind == ProvenanceKind.EXPLICIT_MENTION
    for cid in fixture_history.deletion:
        assert by_id[cid].provenance.kind == ProvenanceKind.DELETION_ATTRIBUTION
        assert by_id[cid].provenance.object_type == "node"
    assert all(p.label == Label.VANDALISM for p in positives)


def test_explicit_attribution_exclusions(fixture_history, fixture_store):
    """Self mentions, the reverter's own changesets and unknown ids are dropped"""
    reverts = {c.id: c for c in find_vandalism_reverts(fixture_store)}
    self_mention = next(
        c for c in reverts.values() if str(fixture_history.reverter_own) in c.comment and c.uid == 901
    )
    assert attribute_explicit(self_mention, fixture_store) == set()

    unknown = next(c for c in reverts.values() if "99999" in c.comment)
    assert attribute_explicit(unknown, fixture_store) == {fixture_history.explicit[9]}


def test_deletion_needs_single_other_author(fixture_store):
    """Deleting multi-author or reverter-only objects attributes nothing"""
    cleanup = next(c for c in find_vandalism_reverts(fixture_store) if c.comment == "vandalism cleanup")
    assert attribute_by_deletion(cleanup, fixture_store) == {}


def test_non_vandalism_revert_ignored(fixture_history, fixture_store):
    """A 'fix typo' changeset is neither a revert nor attributed"""
    positives, revert_ids = mine_positives(fixture_store)
    assert fixture_history.typo_fix not in revert_ids
    assert fixture_history.typo_fix not in {p.changeset_id for p in positives}


def test_mine_dataset_balanced(fixture_history, fixture_store):
    """Negatives equal positives and never include reverts or positives"""
    examples = mine_dataset(fixture_store, seed=3)
    positives = [e for e in examples if e.label == Label.VANDALISM]
    negatives = [e for e in examples if e.label == Label.REGULAR]

    assert len(positives) == len(negatives) == 20
    negative_ids = {e.changeset_id for e in negatives}
    assert not negative_ids & fixture_history.positives
    assert not negative_ids & set(fixture_history.reverts)
    assert [e.changeset_id for e in examples] == sorted(e.changeset_id for e in examples)


def test_mine_dataset_seeded(fixture_store):
    """Same seed, same negatives; another seed draws others"""
    first = mine_dataset(fixture_store, seed=1)
    assert mine_dataset(fixture_store, seed=1) == first
    assert mine_dataset(fixture_store, seed=2) != first


def test_sample_negatives_population_too_small(fixture_store):
    """Asking for more negatives than exist raises"""
    with pytest.raises(InsufficientPopulation):
        sample_negatives(fixture_store, set(), 201, seed=0)


def test_sample_negatives_never_draws_reverts_or_positives(fixture_store, fixture_history):
    """Even with nothing excluded, the population leaves out reverts and attributed vandalism"""
    forbidden = {r.id for r in find_vandalism_reverts(fixture_store)} | fixture_history.positives
    allowed = set(fixture_store.ids()) - forbidden

    everything = sample_negatives(fixture_store, set(), len(allowed), seed=3)
    assert {e.changeset_id for e in everything} == allowed
    with pytest.raises(InsufficientPopulation):
        sample_negatives(fixture_store, set(), len(allowed) + 1, seed=3)


def _examples_from_users(user_counts):
    examples, cid = [], 0
    for user, count in user_counts.items():
        for _ in range(count):
            cid += 1
            examples.append(
                LabeledExample(
                    changeset_id=cid,
                    label=Label.REGULAR,
                    provenance=Provenance(kind=ProvenanceKind.NEGATIVE_SAMPLE),
                    user_id=user,
                )
            )
    return examples


def test_split_user_disjoint(fixture_store):
    """No user spans two splits and every example is assigned once"""
    examples = mine_dataset(fixture_store, seed=0)
    split = split_user_disjoint(examples, seed=0)

    users = [set(e.user_id for e in split.part(name)) for name in SPLIT_NAMES]
    assert not users[0] & users[1]
    assert not users[0] & users[2]
    assert not users[1] & users[2]
    assert sorted(split.assignment()) == sorted(e.changeset_id for e in examples)
    assert all(split.part(name) for name in SPLIT_NAMES)


def test_split_ratios_on_many_users():
    """With many small users the split sizes land within 3 points of the ratios"""
    examples = _examples_from_users({u: 1 + u % 3 for u in range(500)})
    split = split_user_disjoint(examples, (0.7, 0.1, 0.2), seed=4)
    total = len(examples)
    for name, ratio in zip(SPLIT_NAMES, (0.7, 0.1, 0.2)):
        assert abs(len(split.part(name)) / total - ratio) <= 0.03


def test_split_ten_users_of_ten():
    """Ten users with ten changesets each split into 7, 1 and 2 users"""
    examples = _examples_from_users({u: 10 for u in range(10)})
    for seed in range(5):
        split = split_user_disjoint(examples, (0.7, 0.1, 0.2), seed=seed)
        users = [len({e.user_id for e in split.part(name)}) for name in SPLIT_NAMES]
        assert users == [7, 1, 2]
        assert [len(split.part(name)) for name in SPLIT_NAMES] == [70, 10, 20]


def test_split_seeded():
    """The seed alone decides the assignment"""
    examples = _examples_from_users({u: 1 for u in range(100)})
    first = split_user_disjoint(examples, seed=7).assignment()
    assert split_user_disjoint(examples, seed=7).assignment() == first
    assert split_user_disjoint(examples, seed=8).assignment() != first


@pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.5), (1.2, -0.1, -0.1), (0.5, 0.5)])
def test_split_bad_ratios(ratios):
    """Ratios must be three non-negative numbers summing to one"""
    with pytest.raises(UsageError):
        split_user_disjoint(_examples_from_users({1: 1}), ratios)


def test_provenance_must_match_label():
    """Vandalism cannot come from negative sampling, nor Regular from a revert"""
    with pytest.raises(ValidationError):
        LabeledExample(
            changeset_id=1,
            label=Label.VANDALISM,
            provenance=Provenance(kind=ProvenanceKind.NEGATIVE_SAMPLE),
            user_id=1,
        )
    with pytest.raises(ValidationError):
        LabeledExample(
            changeset_id=1,
            label=Label.REGULAR,
            provenance=Provenance(kind=ProvenanceKind.EXPLICIT_MENTION, revert_id=2),
            user_id=1,
        )


def test_convert_published(fixture_store):
    """Authors come from the row or the store; unknown authors are skipped; first duplicate wins"""
    rows = [
        (5, Label.VANDALISM, 42),
        (5, Label.REGULAR, 42),
        (6, Label.REGULAR, None),
        (99999, Label.VANDALISM, None),
    ]
    examples = convert_published(rows, "OSM-Manual", fixture_store)

    assert [e.changeset_id for e in examples] == [5, 6]
    assert examples[0].label == Label.VANDALISM
    assert examples[0].user_id == 42
    assert examples[1].user_id == fixture_store.changeset(6).uid
    assert all(e.provenance.kind == ProvenanceKind.IMPORTED for e in examples)
    assert examples[0].provenance.source == "OSM-Manual"
