"""Ground congruence closure over interned terms, with explanations.

Union-find over term ids plus a congruence table keyed by (head, argument
class ids).  Merges are recorded in a proof forest so that an equality
between two terms can be explained by a small set of the originally
asserted equations (congruence steps recurse into argument explanations).
"""

from __future__ import annotations

from .fol import App, Term


class CongruenceClosure:
    def __init__(self):
        self.term_of: list[tuple[str, tuple[int, ...]]] = []  # id -> (head, arg ids)
        self.ids: dict[tuple[str, tuple[int, ...]], int] = {}
        self.parent: list[int] = []  # union-find
        self.rank: list[int] = []
        self.use: dict[int, list[int]] = {}  # class rep -> parent term ids
        self.sig: dict[tuple[str, tuple[int, ...]], int] = {}  # congruence table
        # proof forest: node -> (other node, cause); cause is ("eq", tag) or
        # ("cong", a, b) for terms merged because their arguments were equal
        self.forest: dict[int, tuple[int, tuple]] = {}
        self.merges = 0

    def add_term(self, term: Term) -> int:
        if isinstance(term, App):
            arg_ids = tuple(self.add_term(a) for a in term.args)
            key = (term.head.name, arg_ids)
        else:
            raise ValueError("congruence closure handles ground terms only")
        tid = self.ids.get(key)
        if tid is not None:
            return tid
        tid = len(self.term_of)
        self.ids[key] = tid
        self.term_of.append(key)
        self.parent.append(tid)
        self.rank.append(0)
        for a in arg_ids:
            self.use.setdefault(self.find(a), []).append(tid)
        if arg_ids:
            skey = self._sig_key(tid)
            rep = self.sig.get(skey)
            if rep is None:
                self.sig[skey] = tid
            else:
                # congruent twin already present: merge immediately
                self._merge_pending([(tid, rep, ("cong", tid, rep))])
        return tid

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def _sig_key(self, tid: int) -> tuple[str, tuple[int, ...]]:
        head, args = self.term_of[tid]
        return (head, tuple(self.find(a) for a in args))

    def merge(self, a: int, b: int, tag) -> None:
        """Assert a = b with an opaque reason tag (an asserted-equality id)."""
        self._merge_pending([(a, b, ("eq", tag))])

    def _merge_pending(self, pending: list[tuple[int, int, tuple]]) -> None:
        while pending:
            a, b, cause = pending.pop()
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                continue
            self.merges += 1
            self._forest_link(a, b, cause)
            if self.rank[ra] > self.rank[rb]:
                ra, rb = rb, ra
            elif self.rank[ra] == self.rank[rb]:
                self.rank[rb] += 1
            # ra is absorbed into rb: re-key the congruence entries of ra's users
            self.parent[ra] = rb
            users = self.use.pop(ra, [])
            for t in users:
                skey = self._sig_key(t)
                rep = self.sig.get(skey)
                if rep is None:
                    self.sig[skey] = t
                elif self.find(rep) != self.find(t):
                    pending.append((t, rep, ("cong", t, rep)))
            self.use.setdefault(rb, []).extend(users)

    def _forest_link(self, a: int, b: int, cause: tuple) -> None:
        # make `a` the root of its proof tree by reversing its path, then a -> b
        path = []
        cur = a
        while cur in self.forest:
            nxt, c = self.forest[cur]
            path.append((cur, nxt, c))
            cur = nxt
        for src, dst, c in reversed(path):
            del self.forest[src]
            self.forest[dst] = (src, c)
        self.forest[a] = (b, cause)

    def are_equal(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def explain(self, a: int, b: int) -> set:
        """Asserted-equality tags whose union entails a = b."""
        tags: set = set()
        done: set[tuple[int, int]] = set()
        self._explain(a, b, tags, done)
        return tags

    def _explain(self, a: int, b: int, tags: set, done: set) -> None:
        if a == b:
            return
        key = (min(a, b), max(a, b))
        if key in done:
            return
        done.add(key)
        for x, y, cause in self._forest_path(a, b):
            kind = cause[0]
            if kind == "eq":
                tags.add(cause[1])
            else:
                _, u, v = cause
                hu, au = self.term_of[u]
                hv, av = self.term_of[v]
                for pa, pb in zip(au, av):
                    self._explain(pa, pb, tags, done)

    def _forest_path(self, a: int, b: int) -> list[tuple[int, int, tuple]]:
        # edges along the tree path between a and b (they share a root)
        anc: dict[int, int] = {}
        cur, d = a, 0
        while True:
            anc[cur] = d
            if cur not in self.forest:
                break
            cur = self.forest[cur][0]
            d += 1
        cur = b
        path_b = []
        while cur not in anc:
            nxt, cause = self.forest[cur]
            path_b.append((cur, nxt, cause))
            cur = nxt
        meet = cur
        path_a = []
        cur = a
        while cur != meet:
            nxt, cause = self.forest[cur]
            path_a.append((cur, nxt, cause))
            cur = nxt
        return path_a + path_b

    def classes(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for t in range(len(self.term_of)):
            out.setdefault(self.find(t), []).append(t)
        return out
