"""Taxonomy-based semantic grouping of segmentation classes.

Classes are sets of words. Two classes are compared by the maximum
word-pair similarity under a path-based taxonomy metric; grouping first
replaces classes present in only one image by their most similar
counterpart (difference merge), then merges remaining classes whose
similarity exceeds a threshold via connected components.

Word similarity follows the Li et al. path/depth formula

    sim(w1, w2) = exp(-a * l) * tanh(b * h)

with l the shortest hypernym path length, h the depth of the deepest
common ancestor, and the metric's published constants a=0.2, b=0.6.
Identical words short-circuit to 1.0 so a class is always maximally
similar to itself.
"""

import math
from collections import deque
from dataclasses import dataclass

from .errors import InputError, UnknownWordError

LI_A = 0.2
LI_B = 0.6


def canonical_name(words):
    return ";".join(sorted(words))


def normalize_word(raw, substitutions=None):
    """Lowercase, join spaces with underscores, then apply substitutions."""
    if raw is None or not raw.strip():
        raise InputError("cannot normalize an empty word")
    word = "_".join(raw.strip().lower().split())
    if substitutions:
        word = substitutions.get(word, word)
    return word


class Taxonomy:
    """Rooted hypernym DAG with depth and path queries.

    Depth counts edges from the root plus one, so the root has depth 1.
    Words may have several parents; all paths run through ancestors.
    """

    def __init__(self, parents):
        self.parents = {w: sorted(set(ps)) for w, ps in parents.items()}
        words = set(self.parents)
        for ps in self.parents.values():
            words.update(ps)
        self.words = words
        roots = sorted(w for w in words if not self.parents.get(w))
        if len(roots) != 1:
            raise InputError(
                f"taxonomy must have exactly one root, found {len(roots)}: {roots[:5]}"
            )
        self.root = roots[0]
        self._depth = self._compute_depths()
        self._up_cache = {}

    @classmethod
    def from_edges(cls, edges):
        parents = {}
        for child, parent in edges:
            parents.setdefault(child, []).append(parent)
            parents.setdefault(parent, [])
        return cls(parents)

    @classmethod
    def from_file(cls, path):
        edges = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise InputError(f"{path}:{lineno}: expected 'child<TAB>parent'")
                edges.append((parts[0].strip(), parts[1].strip()))
        if not edges:
            raise InputError(f"taxonomy file {path} has no edges")
        return cls.from_edges(edges)

    def _compute_depths(self):
        children = {}
        for child, ps in self.parents.items():
            for p in ps:
                children.setdefault(p, []).append(child)
        depth = {self.root: 1}
        queue = deque([self.root])
        while queue:
            node = queue.popleft()
            for child in children.get(node, ()):
                if child not in depth:
                    depth[child] = depth[node] + 1
                    queue.append(child)
        missing = self.words - set(depth)
        if missing:
            raise InputError(
                f"taxonomy is not connected; unreachable from root: {sorted(missing)[:5]}"
            )
        return depth

    def __contains__(self, word):
        return word in self.words

    def depth(self, word):
        self._require(word)
        return self._depth[word]

    def _require(self, word):
        if word not in self.words:
            raise UnknownWordError(word)

    def _ancestors(self, word):
        """word -> minimal upward hop count, including the word at 0."""
        if word in self._up_cache:
            return self._up_cache[word]
        dist = {word: 0}
        queue = deque([word])
        while queue:
            node = queue.popleft()
            for parent in self.parents.get(node, ()):
                if parent not in dist:
                    dist[parent] = dist[node] + 1
                    queue.append(parent)
        self._up_cache[word] = dist
        return dist

    def path_length(self, w1, w2):
        """Shortest path between words running through a common ancestor."""
        self._require(w1)
        self._require(w2)
        up1 = self._ancestors(w1)
        up2 = self._ancestors(w2)
        common = up1.keys() & up2.keys()
        return min(up1[a] + up2[a] for a in common)

    def subsumer_depth(self, w1, w2):
        """Depth of the deepest common ancestor (at least 1: the root)."""
        self._require(w1)
        self._require(w2)
        common = self._ancestors(w1).keys() & self._ancestors(w2).keys()
        return max(self._depth[a] for a in common)


def load_substitutions(path):
    """Word substitution map from ``from<TAB>to`` lines."""
    subs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'from<TAB>to'")
            subs[parts[0].strip()] = parts[1].strip()
    return subs


def word_similarity(tax, w1, w2, a=LI_A, b=LI_B):
    """Path/depth similarity in [0, 1]; identical words score exactly 1."""
    if w1 == w2:
        tax._require(w1)
        return 1.0
    path = tax.path_length(w1, w2)
    depth = tax.subsumer_depth(w1, w2)
    return math.exp(-a * path) * math.tanh(b * depth)


def class_similarity(tax, class1, class2, a=LI_A, b=LI_B):
    """Maximum word similarity over the cross product of two class sets."""
    if not class1 or not class2:
        raise InputError("class sets must be nonempty")
    return max(
        word_similarity(tax, w1, w2, a, b)
        for w1 in sorted(class1)
        for w2 in sorted(class2)
    )


def difference_merge(tax, classes_a, classes_b):
    """Replace classes only in A by their most similar class in B.

    Returns (resulting class set, mapping) where the mapping covers every
    class of A. Similarity ties resolve to the class in B with the
    lexicographically smallest canonical name.
    """
    set_a = {frozenset(c) for c in classes_a}
    set_b = {frozenset(c) for c in classes_b}
    if not set_b:
        raise InputError("difference merge requires a nonempty reference table")
    ordered_b = sorted(set_b, key=canonical_name)
    mapping = {}
    for cls in sorted(set_a, key=canonical_name):
        if cls in set_b:
            mapping[cls] = cls
            continue
        best = None
        best_score = -1.0
        for candidate in ordered_b:
            score = class_similarity(tax, cls, candidate)
            if score > best_score:
                best = candidate
                best_score = score
        mapping[cls] = best
    return {mapping[c] for c in set_a}, mapping


def class_reduction(tax, classes, theta):
    """Partition classes into groups connected by similarity above theta.

    Edges require strictly ``sim > theta``; each connected component is
    found by breadth-first search and merges into the union of its
    members' words. Returns (groups, mapping) where groups is a list of
    member lists and mapping sends each class to its merged word-set.
    """
    if not 0.0 <= theta <= 1.0:
        raise InputError(f"semantic threshold must be in [0, 1], got {theta}")
    nodes = sorted({frozenset(c) for c in classes}, key=canonical_name)
    adjacency = {c: [] for c in nodes}
    for i, c1 in enumerate(nodes):
        for c2 in nodes[i + 1 :]:
            if class_similarity(tax, c1, c2) > theta:
                adjacency[c1].append(c2)
                adjacency[c2].append(c1)

    groups = []
    seen = set()
    for start in nodes:
        if start in seen:
            continue
        component = []
        queue = deque([start])
        seen.add(start)
        while queue:
            node = queue.popleft()
            component.append(node)
            for neigh in adjacency[node]:
                if neigh not in seen:
                    seen.add(neigh)
                    queue.append(neigh)
        groups.append(sorted(component, key=canonical_name))

    mapping = {}
    for component in groups:
        union = frozenset().union(*component)
        for member in component:
            mapping[member] = union
    return groups, mapping


@dataclass
class GroupingResult:
    """Composed relabelings from semantic grouping.

    ``content_mapping``/``style_mapping`` send each original class set to
    its final merged class; both images end up with the same class table.
    """

    content_mapping: dict
    style_mapping: dict
    classes: list

    def table(self):
        return set(self.classes)


def group_semantics(tax, content_classes, style_classes, theta):
    """Difference merges followed by threshold class reduction.

    The style table is first merged onto the content table, the content
    table onto that result, and the shared table is then reduced with
    ``theta``. The returned mappings compose all three steps.
    """
    c_i = {frozenset(c) for c in content_classes}
    c_s = {frozenset(c) for c in style_classes}
    if not c_i or not c_s:
        raise InputError("both class tables must be nonempty")

    c_s_star, style_map = difference_merge(tax, c_s, c_i)
    c_i_star, content_map = difference_merge(tax, c_i, c_s_star)
    shared = c_i_star & c_s_star
    _, reduction_map = class_reduction(tax, shared, theta)

    content_full = {c: reduction_map[content_map[c]] for c in c_i}
    style_full = {c: reduction_map[style_map[c]] for c in c_s}
    final = sorted({reduction_map[c] for c in shared}, key=canonical_name)
    return GroupingResult(content_full, style_full, final)
