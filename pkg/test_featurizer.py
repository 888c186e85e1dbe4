"""
Tests for feature extraction and normalization
"""

import numpy as np
import pytest

from conftest import T0, build_fixture_history
from ovid.config import config_loader
from ovid.core.featurizer import (
    ACCOUNT_EPOCH,
    EditorVocabulary,
    Featurizer,
    MapFeatures,
    apply_norm,
    denormalize,
    fit_norm,
)
from ovid.core.user_history import TOP12_KEYS, UserHistoryIndex
from ovid.errors import EmptyTrainingSet, MissingPreviousVersion, UsageError
from ovid.models.features import (
    CHANGESET_BASE_DIM,
    D_EDIT,
    D_USER,
    EDIT_FEATURE_NAMES,
    USER_FEATURE_NAMES,
)
from ovid.models.osm import Changeset, Edit, EditOp, ObjectType, OsmObject, iso_week
from ovid.services.store import ChangesetStore

HOUR = 3600


def at(cid: int) -> int:
    """Creation time of fixture changeset cid"""
    return T0 + (cid - 1) * HOUR


def edit_column(features, name):
    return features.values[EDIT_FEATURE_NAMES.index(name)]


@pytest.fixture
def featurizer(fixture_store):
    return Featurizer(fixture_store)


@pytest.fixture
def vocabulary():
    return EditorVocabulary(config_loader.load_editor_vocabulary())


def test_editor_vocabulary_prefixes(vocabulary):
    """created_by maps by longest prefix; unknown and missing go to other"""
    assert vocabulary.slots[vocabulary.slot("JOSM/1.5 (18303 en)")] == "JOSM"
    assert vocabulary.slots[vocabulary.slot("iD 2.20.2")] == "iD"
    assert vocabulary.slots[vocabulary.slot("Go Map!! 3.1")] == "Go Map!!"
    assert vocabulary.slot("MyOwnEditor 0.1") == vocabulary.other
    assert vocabulary.slot(None) == vocabulary.other
    assert vocabulary.one_hot("Potlatch 2").sum() == 1.0


def test_map_features_validity():
    """Exact values, free-form keys and glob keys"""
    mf = MapFeatures(config_loader.load_map_features())
    assert mf.is_valid("amenity", "cafe")
    assert not mf.is_valid("amenity", "spaceship")
    assert mf.is_valid("name", "anything at all")
    assert mf.is_valid("name:de", "Kaffee")
    assert mf.is_valid("surface", "concrete:plates")
    assert not mf.is_valid("survey:date", "2018")
    assert mf.count_valid({"amenity": "cafe", "name": "x", "cuisine": "coffee_shop"}) == 2


def test_changeset_features(featurizer, fixture_store):
    """Counts, envelope, editor slot, imagery and comment length of changeset 51"""
    x_c = featurizer.changeset_features(fixture_store.changeset(51))
    assert x_c.shape == (featurizer.d_c,)
    assert featurizer.d_c == CHANGESET_BASE_DIM + len(featurizer.vocabulary)
    named = dict(zip(featurizer.changeset_names, x_c))
    assert named["n_edits"] == 2.0
    assert named["editor_Vespucci"] == 1.0
    assert named["comment_length"] == len("Add cafe 51")

    assert list(x_c[:4]) == [1.0, 1.0, 0.0, 2.0]
    assert x_c[4:9] == pytest.approx([48.001, 48.051, 11.001, 11.051, 0.05 * 0.05])
    editors = x_c[9 : 9 + len(featurizer.vocabulary)]
    assert featurizer.vocabulary.slots[int(np.argmax(editors))] == "Vespucci"
    assert x_c[-2] == 1.0
    assert x_c[-1] == len("Add cafe 51")


def test_user_features_strictly_before(featurizer, fixture_store):
    """A user's first changeset sees no history; the next one sees the first"""
    first = dict(zip(USER_FEATURE_NAMES, featurizer.user_features(fixture_store.changeset(1))))
    assert first["past_creates"] == 0
    assert first["n_contributions"] == 0
    assert first["n_active_weeks"] == 0

    later = dict(zip(USER_FEATURE_NAMES, featurizer.user_features(fixture_store.changeset(21))))
    assert later["past_creates"] == 1
    assert later["past_modifications"] == 0
    assert later["n_contributions"] == 1
    assert later["n_top12_keys_used"] == 2
    assert later["n_active_weeks"] == 1
    assert later["account_creation"] == (T0 - 400 * 86400 - ACCOUNT_EPOCH) // 86400


def _brute_force_history(store, uid, t):
    """Counters recomputed from scratch over every edit and changeset"""
    edits = [
        e
        for c in store.changesets()
        for e in c.edits
        if (e.uid if e.uid is not None else c.uid) == uid and e.t < t
    ]
    added = []
    for e in edits:
        if e.op == EditOp.DELETE:
            continue
        earlier = [v for v in store.versions((e.object.id, e.object.type)) if v.ver < e.ver]
        before = set(earlier[-1].tags) if earlier else set()
        added.extend(k for k in e.object.tags if k in TOP12_KEYS and k not in before)
    weeks = {iso_week(c.t) for c in store.changesets() if c.uid == uid and c.t < t}
    return {
        "past_creates": sum(e.op == EditOp.CREATE for e in edits),
        "past_modifications": sum(e.op == EditOp.MODIFY for e in edits),
        "past_deletes": sum(e.op == EditOp.DELETE for e in edits),
        "contributions": len({(e.object.id, e.object.type) for e in edits}),
        "top12_additions": len(added),
        "top12_distinct": len(set(added)),
        "active_weeks": len(weeks),
    }


def test_user_history_matches_brute_force(fixture_store):
    """Indexed counters equal a full rescan at every changeset time of every author"""
    index = UserHistoryIndex(fixture_store)
    for c in fixture_store.changesets():
        for t in (c.t, c.t + 61):
            snapshot = index.history(c.uid, t).model_dump()
            expected = _brute_force_history(fixture_store, c.uid, t)
            assert {k: snapshot[k] for k in expected} == expected, (c.id, t)


def test_future_activity_does_not_leak():
    """Appending later changesets leaves the user and edit features of earlier ones unchanged"""
    before = Featurizer(build_fixture_history().builder.store())

    history = build_fixture_history()
    b = history.builder
    for k in range(5):
        cs = b.changeset(1, comment=f"Later work {k}", created_by="Potlatch 2")
        b.create_node(cs, 8000 + k, {"building": "yes", "highway": "bus_stop", "power": "pole"})
        b.modify(cs, "node", 1011, {"source": "survey", "landuse": "grass"})
    after = Featurizer(b.store())

    for c in before.store.changesets():
        later = after.store.changeset(c.id)
        assert np.array_equal(before.user_features(c), after.user_features(later)), c.id
        assert np.array_equal(before.edit_matrix(c)[0], after.edit_matrix(later)[0]), c.id


def test_top12_modes(fixture_store):
    """additions counts every added key; distinct counts each key once"""
    changeset = fixture_store.changeset(41)
    index = USER_FEATURE_NAMES.index("n_top12_keys_used")
    assert Featurizer(fixture_store, top12_mode="additions").user_features(changeset)[index] == 4
    assert Featurizer(fixture_store, top12_mode="distinct").user_features(changeset)[index] == 2


def test_unknown_top12_mode(fixture_store):
    """Only the two documented top-12 modes are accepted"""
    with pytest.raises(UsageError):
        Featurizer(fixture_store, top12_mode="everything")


def test_modify_edit_features(featurizer, fixture_history, fixture_store):
    """The planted rename compares against the version before it"""
    changeset = fixture_store.changeset(fixture_history.explicit[0])
    (rename,) = changeset.edits
    features = featurizer.edit_features(rename)

    assert not features.missing_history
    assert edit_column(features, "type_node") == 1.0
    assert edit_column(features, "op_modify") == 1.0
    assert edit_column(features, "version_number") == 3
    assert edit_column(features, "n_previous_authors") == 2
    assert edit_column(features, "time_to_previous_version") == at(changeset.id) - at(51)
    assert edit_column(features, "n_tags_total") == 2
    assert edit_column(features, "n_tags_added") == 0
    assert edit_column(features, "n_tags_deleted") == 1
    assert edit_column(features, "n_valid_tags") == 2
    assert edit_column(features, "n_previous_valid_tags") == 3
    assert edit_column(features, "name_changed") == 1.0


def test_delete_edit_features(featurizer, fixture_store):
    """A delete has no tags after it and loses every tag it had"""
    revert = next(c for c in fixture_store.changesets() if c.comment == "Removing vandalism")
    features = featurizer.edit_features(revert.edits[0])

    assert edit_column(features, "op_delete") == 1.0
    assert edit_column(features, "version_number") == 2
    assert edit_column(features, "n_previous_authors") == 1
    assert edit_column(features, "n_tags_total") == 0
    assert edit_column(features, "n_tags_deleted") == 2
    assert edit_column(features, "n_valid_tags") == 0
    assert edit_column(features, "n_previous_valid_tags") == 2
    assert edit_column(features, "name_changed") == 1.0


def test_create_edit_features(featurizer, fixture_store):
    """A create adds all of its tags and has no history"""
    (create,) = fixture_store.changeset(1).edits
    features = featurizer.edit_features(create)
    assert edit_column(features, "op_create") == 1.0
    assert edit_column(features, "n_tags_added") == 2
    assert edit_column(features, "n_previous_authors") == 0
    assert edit_column(features, "time_to_previous_version") == 0


def test_missing_previous_version_flagged():
    """A modify with no indexed earlier version is zero-filled and flagged, or raises in strict mode"""
    store = ChangesetStore()
    orphan = Edit(
        object=OsmObject(id=9, type=ObjectType.NODE, tags={"name": "x"}, ver=3),
        op=EditOp.MODIFY,
        ver=3,
        t=T0 + 60,
        changeset_id=1,
        uid=1,
    )
    store.add_changeset(Changeset(id=1, t=T0, uid=1, edits=(orphan,)))
    featurizer = Featurizer(store)

    bundle = featurizer.bundle(store.changeset(1))
    assert bundle.missing_history
    assert edit_column(featurizer.edit_features(orphan), "n_previous_authors") == 0
    with pytest.raises(MissingPreviousVersion):
        featurizer.edit_features(orphan, strict=True)


def test_bundle_shapes(featurizer, fixture_store):
    """Bundles carry d_c, d_u and one d_e column per edit in changeset order"""
    changeset = fixture_store.changeset(51)
    bundle = featurizer.bundle(changeset, label=0, split="train")
    assert bundle.x_c.shape == (featurizer.d_c,)
    assert bundle.x_u.shape == (D_USER,)
    assert bundle.m_e.shape == (D_EDIT, 2)
    assert bundle.m_e[EDIT_FEATURE_NAMES.index("op_create"), 0] == 1.0
    assert bundle.m_e[EDIT_FEATURE_NAMES.index("op_modify"), 1] == 1.0


def test_empty_changeset_bundle():
    """A changeset without edits has an empty edit matrix"""
    store = ChangesetStore()
    store.add_changeset(Changeset(id=1, t=T0, uid=1))
    bundle = Featurizer(store).bundle(store.changeset(1))
    assert bundle.n_edits == 0
    assert bundle.m_e.shape == (D_EDIT, 0)


def test_normalization(featurizer, fixture_store):
    """Train statistics z-score the train set; constant dimensions are only centered"""
    bundles = [featurizer.bundle(c) for c in list(fixture_store.changesets())[:60]]
    stats = fit_norm(bundles)
    normalized = [apply_norm(b, stats) for b in bundles]

    x_u = np.stack([b.x_u for b in normalized])
    assert np.allclose(x_u.mean(axis=0), 0.0, atol=1e-9)
    varying = np.asarray(stats.u_std) > 0
    assert np.allclose(x_u.std(axis=0)[varying], 1.0)
    assert np.all(x_u[:, ~varying] == 0.0)

    edits = np.concatenate([b.m_e for b in normalized if b.n_edits], axis=1)
    assert np.allclose(edits.mean(axis=1), 0.0, atol=1e-9)


def test_denormalize_inverts(featurizer, fixture_store):
    """denormalize(apply_norm(b)) recovers the raw features"""
    bundles = [featurizer.bundle(c) for c in list(fixture_store.changesets())[:40]]
    stats = fit_norm(bundles)
    for raw in bundles[:5]:
        back = denormalize(apply_norm(raw, stats), stats)
        assert np.allclose(back.x_c, raw.x_c)
        assert np.allclose(back.x_u, raw.x_u)
        assert np.allclose(back.m_e, raw.m_e)


def test_fit_norm_needs_examples():
    """Normalization cannot be fitted on nothing"""
    with pytest.raises(EmptyTrainingSet):
        fit_norm([])
