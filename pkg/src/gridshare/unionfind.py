class UnionFind:
    """Disjoint sets over ``0..size-1`` with path halving and union by size.

    Ties are broken towards the smaller root index so the representative of a
    set is reproducible for a given sequence of unions.
    """

    def __init__(self, size):
        self.parent = list(range(size))
        self.size = [1] * size
        self.components = size

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True

    def groups(self):
        """Members of every set, each list ascending, lists ordered by smallest member."""
        out = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return sorted(out.values(), key=lambda g: g[0])

    def largest(self):
        return max((self.size[i] for i in range(len(self.parent)) if self.parent[i] == i), default=0)
