"""Token-to-class mapping semantics, statistics and serialization."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypernym_lm.classmap import (
    ClassMapParams,
    build_classmap,
    classmap_stats,
    count_frequencies,
    load_classmap,
    load_frequencies,
    save_classmap,
    save_frequencies,
)

FIG2_FREQS = {"iron": 9, "magnesium": 5, "desk": 8, "the": 500, "market": 40}


class TestCountFrequencies:
    def test_basic(self):
        assert count_frequencies(["a", "b", "a"]) == {"a": 2, "b": 1}

    def test_empty(self):
        assert count_frequencies([]) == {}

    def test_total_equals_stream_length(self, fixture_tree):
        from hypernym_lm.data import read_token_stream

        stream = read_token_stream(fixture_tree["train"])
        freqs = count_frequencies(stream)
        assert sum(freqs.values()) == len(stream)
        assert min(freqs.values()) >= 1


class TestBuildClassmap:
    def test_depth6_splits_metals_from_furniture(self, small_db):
        cmap = build_classmap(FIG2_FREQS, small_db, ClassMapParams(depth=6))
        assert cmap.mapping == {
            "iron": "metallic_element.n.01",
            "magnesium": "metallic_element.n.01",
            "desk": "instrumentality.n.03",
        }

    def test_depth2_collapses_to_physical_entity(self, small_db):
        cmap = build_classmap(FIG2_FREQS, small_db, ClassMapParams(depth=2))
        assert set(cmap.mapping.values()) == {"physical_entity.n.01"}
        assert set(cmap.mapping) == {"iron", "magnesium", "desk"}

    def test_zero_threshold_maps_nothing(self, small_db):
        cmap = build_classmap(FIG2_FREQS, small_db, ClassMapParams(depth=6, freq_threshold=0))
        assert cmap.mapping == {}

    def test_threshold_boundary_is_inclusive(self, small_db):
        # skip rule is freq > f, so freq == f still maps
        cmap = build_classmap(FIG2_FREQS, small_db,
                              ClassMapParams(depth=6, freq_threshold=8))
        assert "desk" in cmap.mapping and "magnesium" in cmap.mapping
        assert "iron" not in cmap.mapping  # freq 9 > 8

    def test_depth1_maps_to_unique_root(self, small_db):
        # oracle: enumerate every hypernym path in the fixture and check that
        # position 1 is always the same root synset
        roots = {path.at_depth(1).id
                 for syn in small_db.all_synsets("n")
                 for path in small_db.hypernym_paths(syn.id)}
        assert roots == {"entity.n.01"}
        cmap = build_classmap(FIG2_FREQS, small_db, ClassMapParams(depth=1))
        assert set(cmap.mapping.values()) == {"entity.n.01"}
        assert set(cmap.mapping) == {"iron", "magnesium", "desk"}

    def test_sense_iteration_skips_short_first_sense(self, small_db):
        # "table"'s most frequent sense sits on a depth-5 path; the mapping
        # must fall through to the furniture sense at depth 6
        cmap = build_classmap({"table": 3}, small_db, ClassMapParams(depth=6))
        assert cmap.mapping == {"table": "instrumentality.n.03"}

    def test_path_length_filter(self, train_db):
        # oxygen's only path has length 6, so it maps at d=6 but not d=7
        at6 = build_classmap({"oxygen": 4, "copper": 9}, train_db, ClassMapParams(depth=6))
        at7 = build_classmap({"oxygen": 4, "copper": 9}, train_db, ClassMapParams(depth=7))
        assert at6.mapping["oxygen"] == "oxygen.n.01"
        assert "oxygen" not in at7.mapping
        assert at7.mapping["copper"] == "copper.n.01"

    def test_verb_only_words_never_map(self, small_db):
        cmap = build_classmap({"press": 10}, small_db, ClassMapParams(depth=1))
        assert cmap.mapping == {}

    def test_depth_consistency_re_derivation(self, train_db, fixture_tree):
        from hypernym_lm.data import read_token_stream

        freqs = count_frequencies(read_token_stream(fixture_tree["train"]))
        d = 6
        cmap = build_classmap(freqs, train_db, ClassMapParams(depth=d))
        assert cmap.mapping
        for token, cls in cmap.mapping.items():
            found = False
            for syn in train_db.synsets_for(token):
                for path in train_db.hypernym_paths(syn):
                    if len(path) >= d and path.at_depth(d).id == cls \
                            and path.at_depth(d).pos == "n":
                        found = True
            assert found, f"{token} -> {cls} not at depth {d} of any path"

    def test_class_count_nondecreasing_in_depth(self, train_db, fixture_tree):
        # recorded observation on this database, not a universal law
        from hypernym_lm.data import read_token_stream

        freqs = count_frequencies(read_token_stream(fixture_tree["train"]))
        counts = []
        for d in range(2, 8):
            cmap = build_classmap(freqs, train_db, ClassMapParams(depth=d))
            counts.append(classmap_stats(cmap).num_classes)
        assert counts == sorted(counts)
        assert counts[0] >= 1

    @settings(max_examples=30, deadline=None)
    @given(st.dictionaries(
        st.sampled_from(["iron", "magnesium", "desk", "table", "dog", "apple",
                         "hammer", "oxygen", "village", "the"]),
        st.integers(min_value=1, max_value=300), min_size=1),
        st.integers(min_value=0, max_value=300), st.integers(min_value=0, max_value=300))
    def test_monotone_in_threshold(self, train_db, freqs, f1, f2):
        lo, hi = sorted((f1, f2))
        small = build_classmap(freqs, train_db, ClassMapParams(6, lo))
        big = build_classmap(freqs, train_db, ClassMapParams(6, hi))
        assert set(small.mapping) <= set(big.mapping)

    def test_deterministic_bytes(self, small_db, tmp_path):
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        save_classmap(build_classmap(dict(FIG2_FREQS), small_db, ClassMapParams(6)), a)
        save_classmap(build_classmap(dict(reversed(FIG2_FREQS.items())), small_db,
                                     ClassMapParams(6)), b)
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ClassMapParams(depth=0)
        with pytest.raises(ValueError):
            ClassMapParams(depth=3, freq_threshold=-1)


class TestStats:
    def test_empty(self, small_db):
        cmap = build_classmap({}, small_db, ClassMapParams(6))
        stats = classmap_stats(cmap)
        assert (stats.num_classes, stats.num_mapped_tokens) == (0, 0)
        assert stats.size_histogram == {}

    def test_fig2_histogram(self, small_db):
        cmap = build_classmap(FIG2_FREQS, small_db, ClassMapParams(6))
        stats = classmap_stats(cmap)
        assert stats.num_classes == 2
        assert stats.num_mapped_tokens == 3
        # one class of size 2 (the metals) and one of size 1 (desk)
        assert stats.size_histogram == {2: 1, 1: 1}


class TestSerialization:
    def test_classmap_roundtrip(self, small_db, tmp_path):
        cmap = build_classmap(FIG2_FREQS, small_db,
                              ClassMapParams(depth=6, freq_threshold=100),
                              corpus_id="toy")
        p = tmp_path / "cm.tsv"
        save_classmap(cmap, p, extra_headers={"config": "abc123"})
        loaded, extras = load_classmap(p)
        assert loaded.mapping == cmap.mapping
        assert loaded.params == cmap.params
        assert loaded.wordnet_version == small_db.version
        assert loaded.corpus_id == "toy"
        assert extras["config"] == "abc123"

    def test_inf_threshold_header(self, small_db, tmp_path):
        cmap = build_classmap(FIG2_FREQS, small_db, ClassMapParams(depth=6))
        p = tmp_path / "cm.tsv"
        save_classmap(cmap, p)
        assert "# d=6 f=inf" in p.read_text()
        loaded, _ = load_classmap(p)
        assert math.isinf(loaded.params.freq_threshold)

    def test_frequencies_roundtrip(self, tmp_path):
        freqs = {"a": 3, "b": 1, "<unk>": 2}
        p = tmp_path / "f.tsv"
        save_frequencies(freqs, p, corpus_id="toy")
        loaded, _ = load_frequencies(p)
        assert loaded == freqs
