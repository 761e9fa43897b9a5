"""WordNet database loading and hypernym-path traversal.

Two on-disk formats are supported:

* the standard WNDB distribution (``index.noun`` / ``data.noun`` and friends,
  cross-referenced by byte offsets), and
* a small line-oriented fixture format used by the test suite and demos:
  ``synset_id<TAB>lemma1,lemma2<TAB>hypernym_id1,hypernym_id2``.

Synset ids follow the usual ``lemma.pos.NN`` convention (e.g. ``iron.n.01``),
where NN is the 1-based sense number of the synset's head lemma. Sense order
comes straight from the index files, which store senses most-frequent first.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import WndbParseError, WordNetLoadError

# lookup order used when a word has synsets in several parts of speech
_POS_ORDER = ("n", "v", "a", "r")

_WNDB_FILES = {
    "n": ("index.noun", "data.noun"),
    "v": ("index.verb", "data.verb"),
    "a": ("index.adj", "data.adj"),
    "r": ("index.adv", "data.adv"),
}

# trailing adjective syntax markers such as "(a)" or "(ip)"
_ADJ_MARKER = re.compile(r"\((a|p|ip)\)$")

_VERSION_RE = re.compile(r"WordNet\s+(\d+\.\d+)")


@dataclass(frozen=True)
class Synset:
    """One WordNet concept: an id, its word forms and its hypernym parents."""

    id: str
    pos: str
    lemmas: tuple[str, ...]
    hypernym_ids: tuple[str, ...]


@dataclass(frozen=True)
class HypernymPath:
    """A root-first chain of synsets ending at the queried synset."""

    synsets: tuple[Synset, ...]

    def __len__(self) -> int:
        return len(self.synsets)

    def at_depth(self, d: int) -> Synset:
        """Synset at 1-based depth ``d`` (the root is depth 1)."""
        if d < 1 or d > len(self.synsets):
            raise IndexError(f"depth {d} outside path of length {len(self.synsets)}")
        return self.synsets[d - 1]

    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.synsets)


def normalize_lemma(word: str) -> str:
    """Standard WNDB lookup form: lowercase, spaces collapsed to underscores."""
    return word.strip().lower().replace(" ", "_")


class WordNetDb:
    """Immutable synset graph with sense-ordered lookup.

    Safe for concurrent reads after construction; path enumeration results
    are memoized under a lock.
    """

    def __init__(self, synsets: dict[str, Synset], lemma_index: dict[tuple[str, str], list[str]],
                 version: str = "unknown"):
        self._synsets = synsets
        self._lemma_index = lemma_index
        self.version = version
        self._path_cache: dict[str, tuple[HypernymPath, ...]] = {}
        self._path_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._synsets)

    def synset(self, synset_id: str) -> Synset:
        try:
            return self._synsets[synset_id]
        except KeyError:
            raise KeyError(f"unknown synset id: {synset_id!r}") from None

    def all_synsets(self, pos: str | None = None):
        for s in self._synsets.values():
            if pos is None or s.pos == pos:
                yield s

    def count(self, pos: str) -> int:
        return sum(1 for _ in self.all_synsets(pos))

    def synsets_for(self, word: str) -> list[Synset]:
        """All synsets containing ``word``, nouns first, each POS in sense order.

        Absent words yield an empty list.
        """
        lemma = normalize_lemma(word)
        out: list[Synset] = []
        for pos in _POS_ORDER:
            for sid in self._lemma_index.get((lemma, pos), ()):
                out.append(self._synsets[sid])
        return out

    def hypernym_paths(self, synset: Synset | str) -> list[HypernymPath]:
        """Every distinct root-to-synset chain, root first.

        Order is depth-first over hypernym parents in stored order, so the
        result is deterministic for a given database.
        """
        sid = synset if isinstance(synset, str) else synset.id
        if sid not in self._synsets:
            raise KeyError(f"unknown synset id: {sid!r}")
        return list(self._paths(sid, ()))

    def _paths(self, sid: str, stack: tuple[str, ...]) -> tuple[HypernymPath, ...]:
        cached = self._path_cache.get(sid)
        if cached is not None:
            return cached
        if sid in stack:
            raise WordNetLoadError(f"hypernym cycle detected at {sid!r}")
        s = self._synsets[sid]
        if not s.hypernym_ids:
            paths = (HypernymPath((s,)),)
        else:
            acc: list[HypernymPath] = []
            for pid in s.hypernym_ids:
                if pid not in self._synsets:
                    raise WordNetLoadError(f"{sid!r} points at unknown hypernym {pid!r}")
                for parent_path in self._paths(pid, stack + (sid,)):
                    acc.append(HypernymPath(parent_path.synsets + (s,)))
            paths = tuple(acc)
        with self._path_lock:
            self._path_cache.setdefault(sid, paths)
        return paths


# ---------------------------------------------------------------------------
# WNDB format
# ---------------------------------------------------------------------------


def _is_preamble(line: str) -> bool:
    return line.startswith(" ")


def _parse_data_file(path: Path, pos: str, records: dict, version_out: list[str]):
    """Parse one data.* file into (pos, offset) -> raw record dicts."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise WordNetLoadError(f"cannot open {path}: {e}") from e
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if _is_preamble(line):
                m = _VERSION_RE.search(line)
                if m and not version_out:
                    version_out.append(m.group(1))
                continue
            line = line.rstrip("\n")
            if not line:
                continue
            body = line.split(" | ", 1)[0]
            fields = body.split()
            try:
                offset = int(fields[0])
                ss_type = fields[2]
                w_cnt = int(fields[3], 16)
                words = []
                for i in range(w_cnt):
                    raw = fields[4 + 2 * i]
                    words.append(_ADJ_MARKER.sub("", raw))
                p_base = 4 + 2 * w_cnt
                p_cnt = int(fields[p_base])
                hypernyms: list[tuple[str, int]] = []
                instance_hypernyms: list[tuple[str, int]] = []
                for i in range(p_cnt):
                    sym, tgt_off, tgt_pos, _src = fields[p_base + 1 + 4 * i: p_base + 5 + 4 * i]
                    if sym == "@":
                        hypernyms.append((tgt_pos, int(tgt_off)))
                    elif sym == "@i":
                        instance_hypernyms.append((tgt_pos, int(tgt_off)))
            except (IndexError, ValueError) as e:
                raise WndbParseError(path, line_no, f"malformed data record: {e}") from e
            records[(pos, offset)] = {
                "ss_type": ss_type,
                "words": tuple(words),
                # plain hypernyms first, then instance hypernyms, each in record order
                "parents": tuple(hypernyms + instance_hypernyms),
            }


def _parse_index_file(path: Path, pos: str, index: dict):
    """Parse one index.* file into lemma -> sense-ordered offsets."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise WordNetLoadError(f"cannot open {path}: {e}") from e
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if _is_preamble(line):
                continue
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split()
            try:
                lemma = fields[0]
                p_cnt = int(fields[3])
                sense_cnt = int(fields[4 + p_cnt])
                offsets = [int(x) for x in fields[6 + p_cnt: 6 + p_cnt + sense_cnt]]
                if len(offsets) != sense_cnt:
                    raise ValueError(f"expected {sense_cnt} sense offsets, got {len(offsets)}")
            except (IndexError, ValueError) as e:
                raise WndbParseError(path, line_no, f"malformed index record: {e}") from e
            index[(lemma, pos)] = offsets


def load_wndb(db_directory: str | os.PathLike) -> WordNetDb:
    """Load a WNDB-format WordNet distribution.

    The noun files are required; verb/adjective/adverb files are loaded when
    present. Raises WordNetLoadError naming any missing required file and
    WndbParseError (with line number) on malformed records.
    """
    root = Path(db_directory)
    if not root.is_dir():
        raise WordNetLoadError(f"not a directory: {root}")
    for name in _WNDB_FILES["n"]:
        if not (root / name).exists():
            raise WordNetLoadError(f"missing required WordNet file: {root / name}")

    records: dict[tuple[str, int], dict] = {}
    index: dict[tuple[str, str], list[int]] = {}
    version_box: list[str] = []
    for pos, (index_name, data_name) in _WNDB_FILES.items():
        index_path, data_path = root / index_name, root / data_name
        if not (index_path.exists() and data_path.exists()):
            if pos == "n":
                raise WordNetLoadError(f"missing required WordNet file: {index_path}")
            continue
        _parse_data_file(data_path, pos, records, version_box)
        _parse_index_file(index_path, pos, index)

    # canonical names: head lemma + 1-based position of this synset among the
    # head lemma's senses (index files store senses most-frequent first)
    names: dict[tuple[str, int], str] = {}
    for (pos, offset), rec in records.items():
        head = normalize_lemma(rec["words"][0])
        index_pos = "a" if rec["ss_type"] == "s" else pos
        offsets = index.get((head, index_pos))
        if not offsets or offset not in offsets:
            raise WordNetLoadError(
                f"data record {pos}:{offset} head lemma {head!r} missing from index"
            )
        names[(pos, offset)] = f"{head}.{rec['ss_type']}.{offsets.index(offset) + 1:02d}"

    synsets: dict[str, Synset] = {}
    for (pos, offset), rec in records.items():
        parent_ids = tuple(names[(p_pos, p_off)] for p_pos, p_off in rec["parents"])
        sid = names[(pos, offset)]
        synsets[sid] = Synset(id=sid, pos=rec["ss_type"], lemmas=rec["words"],
                              hypernym_ids=parent_ids)

    lemma_index: dict[tuple[str, str], list[str]] = {}
    for (lemma, pos), offsets in index.items():
        ids = []
        for off in offsets:
            key = (pos, off)
            if key not in names:
                raise WordNetLoadError(f"index entry {lemma!r} points at missing {pos}:{off}")
            ids.append(names[key])
        lemma_index[(lemma, pos)] = ids

    return WordNetDb(synsets, lemma_index, version=version_box[0] if version_box else "unknown")


# ---------------------------------------------------------------------------
# fixture format
# ---------------------------------------------------------------------------


def load_fixture(path: str | os.PathLike) -> WordNetDb:
    """Load the tab-separated fixture format.

    Per-lemma sense order is the order synsets appear in the file. Lines
    starting with ``#`` are comments; a ``# version:`` comment sets the
    reported database version.
    """
    p = Path(path)
    if not p.is_file():
        raise WordNetLoadError(f"missing fixture database: {p}")
    version = "fixture"
    raw: list[tuple[int, str, tuple[str, ...], tuple[str, ...]]] = []
    with open(p, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                m = re.search(r"#\s*version:\s*(\S+)", line)
                if m:
                    version = m.group(1)
                continue
            parts = line.split("\t")
            if len(parts) == 2:  # root synsets may omit the hypernym field
                parts.append("")
            if len(parts) != 3:
                raise WndbParseError(p, line_no, f"expected 3 tab-separated fields, got {len(parts)}")
            sid, lemma_field, hyp_field = parts
            m = re.fullmatch(r"(.+)\.([nvasr])\.(\d+)", sid)
            if not m:
                raise WndbParseError(p, line_no, f"bad synset id {sid!r}")
            lemmas = tuple(x for x in lemma_field.split(",") if x)
            if not lemmas:
                raise WndbParseError(p, line_no, "synset has no lemmas")
            hyps = tuple(x for x in hyp_field.split(",") if x)
            raw.append((line_no, sid, lemmas, hyps))

    synsets: dict[str, Synset] = {}
    lemma_index: dict[tuple[str, str], list[str]] = {}
    for line_no, sid, lemmas, hyps in raw:
        if sid in synsets:
            raise WndbParseError(p, line_no, f"duplicate synset id {sid!r}")
        pos = sid.rsplit(".", 2)[1]
        pos_key = "a" if pos == "s" else pos
        synsets[sid] = Synset(id=sid, pos=pos, lemmas=lemmas, hypernym_ids=hyps)
        for lemma in lemmas:
            lemma_index.setdefault((normalize_lemma(lemma), pos_key), []).append(sid)
    for line_no, sid, _lemmas, hyps in raw:
        for h in hyps:
            if h not in synsets:
                raise WndbParseError(p, line_no, f"{sid!r} references unknown hypernym {h!r}")
    return WordNetDb(synsets, lemma_index, version=version)


def load_wordnet(path: str | os.PathLike) -> WordNetDb:
    """Load a WordNet database: a directory is WNDB, a file is fixture format."""
    p = Path(path)
    if p.is_dir():
        return load_wndb(p)
    return load_fixture(p)
