"""Emit a miniature but format-faithful WNDB distribution for parser tests.

Offsets embedded in the records are real byte offsets into the data files;
they stay fixed-width (8 digits) so the two-pass layout below is exact.
"""

from __future__ import annotations

from pathlib import Path

PREAMBLE = (
    "  1 This mini database mimics the WordNet 3.0 WNDB layout for tests.\n"
    "  2 Any resemblance to the real license text is intentional but partial.\n"
)

def _decoys(lemma: str, n: int):
    """Filler senses listed ahead of the real synset, so the real one gets
    the same sense number it has in the full database."""
    return [(f"{lemma}_decoy{i}", "n", [lemma], ["entity"], [],
             f"decoy sense {i} of {lemma}") for i in range(1, n + 1)]


# (key, pos, words, parent_keys, instance_parent_keys, gloss)
TOPOLOGY = [
    ("entity", "n", ["entity"], [], [], "that which exists"),
    ("physical_entity", "n", ["physical_entity"], ["entity"], [], "has mass"),
    *_decoys("abstraction", 5),
    ("abstraction", "n", ["abstraction", "abstract_entity"], ["entity"], [], "no mass"),
    ("object", "n", ["object", "physical_object"], ["physical_entity"], [], "a thing"),
    *_decoys("whole", 1),
    ("whole", "n", ["whole", "unit"], ["object"], [], "an assemblage"),
    ("artifact", "n", ["artifact", "artefact"], ["whole"], [], "man-made"),
    *_decoys("instrumentality", 2),
    ("instrumentality", "n", ["instrumentality", "instrumentation"], ["artifact"], [],
     "serves a purpose"),
    *_decoys("furnishing", 1),
    ("furnishing", "n", ["furnishing"], ["instrumentality"], [], "makes rooms usable"),
    ("furniture", "n", ["furniture", "piece_of_furniture"], ["furnishing"], [], "movable"),
    ("table_array", "n", ["table", "tabular_array"], ["arrangement"], [], "rows and columns"),
    ("table_furniture", "n", ["table"], ["furniture"], [], "flat top on legs"),
    ("desk", "n", ["desk"], ["table_furniture"], [], "for writing"),
    *_decoys("matter", 2),
    ("matter", "n", ["matter"], ["physical_entity"], [], "occupies space"),
    ("part", "n", ["part", "portion"], ["physical_entity"], [], "a piece"),
    ("substance", "n", ["substance"], ["matter", "part"], [], "material stuff"),
    ("chemical_element", "n", ["chemical_element"], ["substance"], [], "one kind of atom"),
    ("metallic_element", "n", ["metallic_element"], ["chemical_element"], [], "a metal"),
    ("iron_n", "n", ["iron", "Fe"], ["metallic_element"], [], "element 26"),
    ("magnesium", "n", ["magnesium", "Mg"], ["metallic_element"], [], "element 12"),
    ("group", "n", ["group", "grouping"], ["abstraction"], [], "several together"),
    *_decoys("arrangement", 1),
    ("arrangement", "n", ["arrangement"], ["group"], [], "an ordered grouping"),
    ("press", "v", ["press"], [], [], "apply pressure"),
    ("iron_v", "v", ["iron"], ["press"], [], "smooth with a hot tool"),
]

# per-lemma sense order is the order keys appear here (most frequent first)
_DATA_NAME = {"n": "data.noun", "v": "data.verb"}
_INDEX_NAME = {"n": "index.noun", "v": "index.verb"}


def _data_record(offset_of, key, pos, words, parents, instance_parents, gloss) -> str:
    fields = [f"{offset_of[key]:08d}", "03", pos, f"{len(words):02x}"]
    for w in words:
        fields += [w.replace(" ", "_"), "0"]
    ptrs = [("@", p) for p in parents] + [("@i", p) for p in instance_parents]
    fields.append(f"{len(ptrs):03d}")
    for sym, p in ptrs:
        fields += [sym, f"{offset_of[p]:08d}", pos, "0000"]
    return " ".join(fields) + f" | {gloss}  \n"


def build_wndb(dest: Path) -> Path:
    """Write index/data files for the topology; returns the directory."""
    dest.mkdir(parents=True, exist_ok=True)
    by_pos: dict[str, list] = {}
    for rec in TOPOLOGY:
        by_pos.setdefault(rec[1], []).append(rec)

    for pos, recs in by_pos.items():
        # two passes: record lengths don't depend on offset values
        offset_of = {rec[0]: 0 for rec in recs}
        for _ in range(2):
            pos_cursor = len(PREAMBLE.encode())
            for key, _pos, words, parents, iparents, gloss in recs:
                offset_of[key] = pos_cursor
                line = _data_record(offset_of, key, _pos, words, parents, iparents, gloss)
                pos_cursor += len(line.encode())
        data_lines = [
            _data_record(offset_of, key, _pos, words, parents, iparents, gloss)
            for key, _pos, words, parents, iparents, gloss in recs
        ]
        (dest / _DATA_NAME[pos]).write_text(PREAMBLE + "".join(data_lines), encoding="utf-8")

        lemma_senses: dict[str, list[int]] = {}
        for key, _pos, words, _parents, _ip, _gloss in recs:
            for w in words:
                lemma_senses.setdefault(w.replace(" ", "_").lower(), []).append(offset_of[key])
        index_lines = []
        for lemma in sorted(lemma_senses):
            offs = lemma_senses[lemma]
            n = len(offs)
            parts = [lemma, pos, str(n), "1", "@", str(n), "0"] + [f"{o:08d}" for o in offs]
            index_lines.append(" ".join(parts) + "  \n")
        (dest / _INDEX_NAME[pos]).write_text(PREAMBLE + "".join(index_lines), encoding="utf-8")
    return dest
