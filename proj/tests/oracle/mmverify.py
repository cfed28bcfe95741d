#!/usr/bin/env python3
"""Minimal independent Metamath verifier used as a cross-check oracle.

Supports $c $v $f $e $d $a $p ${ $} and comments, normal and compressed
proofs. Written separately from the C++ kernel so the two can be compared.

Usage: mmverify.py FILE [--labels a,b,c] [--decompress LABEL]
Prints "ok <n>" on success, "fail <label>: <reason>" on the first failure.
"""
import sys


class MMError(Exception):
    pass


def tokenize(text):
    toks = text.split()
    out = []
    i = 0
    while i < len(toks):
        if toks[i] == "$(":
            while toks[i] != "$)":
                i += 1
            i += 1
            continue
        out.append(toks[i])
        i += 1
    return out


class Frame:
    def __init__(self):
        self.c = set()
        self.v = set()
        self.d = set()
        self.f = []  # (var, label)
        self.f_labels = {}
        self.e = []  # (stmt, label)
        self.e_labels = {}


class Database:
    def __init__(self):
        self.frames = [Frame()]
        self.labels = {}  # label -> (kind, stmt / assertion)
        self.order = []
        self.active_d = {}

    def lookup_c(self, tok):
        return any(tok in fr.c for fr in self.frames)

    def lookup_v(self, tok):
        return any(tok in fr.v for fr in self.frames)

    def lookup_f(self, var):
        for fr in reversed(self.frames):
            if var in fr.f_labels:
                return fr.f_labels[var]
        return None

    def lookup_d(self, x, y):
        return any((min(x, y), max(x, y)) in fr.d for fr in self.frames)

    def make_assertion(self, stmt):
        e_hyps = [eh for fr in self.frames for eh, _ in fr.e]
        mand_vars = {tok for hyp in e_hyps + [stmt] for tok in hyp if self.lookup_v(tok)}
        dvs = {(x, y) for fr in self.frames for (x, y) in fr.d if x in mand_vars and y in mand_vars}
        f_hyps = []
        for fr in self.frames:
            for v, lab in fr.f:
                if v in mand_vars:
                    f_hyps.append((v, lab))
                    mand_vars.discard(v)
        e_labels = [lab for fr in self.frames for _, lab in fr.e]
        return (dvs, f_hyps, e_labels, stmt)

    def read(self, toks):
        i = 0
        n = len(toks)

        def read_stmt(i):
            stmt = []
            while toks[i] != "$.":
                stmt.append(toks[i])
                i += 1
            return stmt, i + 1

        label = None
        while i < n:
            tok = toks[i]
            i += 1
            if tok == "$c":
                stmt, i = read_stmt(i)
                for t in stmt:
                    self.frames[-1].c.add(t)
            elif tok == "$v":
                stmt, i = read_stmt(i)
                for t in stmt:
                    self.frames[-1].v.add(t)
            elif tok == "$f":
                stmt, i = read_stmt(i)
                var = stmt[1]
                self.frames[-1].f.append((var, label))
                self.frames[-1].f_labels[var] = label
                self.labels[label] = ("$f", [stmt[0], stmt[1]])
                label = None
            elif tok == "$e":
                stmt, i = read_stmt(i)
                self.frames[-1].e.append((stmt, label))
                self.frames[-1].e_labels[tuple(stmt)] = label
                self.labels[label] = ("$e", stmt)
                label = None
            elif tok == "$a":
                stmt, i = read_stmt(i)
                self.labels[label] = ("$a", self.make_assertion(stmt))
                self.order.append(label)
                label = None
            elif tok == "$p":
                stmt, i = read_stmt(i)
                j = stmt.index("$=")
                proof = stmt[j + 1:]
                stmt = stmt[:j]
                self.labels[label] = ("$p", self.make_assertion(stmt), proof)
                self.active_d[label] = {p for fr in self.frames for p in fr.d}
                self.order.append(label)
                label = None
            elif tok == "$d":
                stmt, i = read_stmt(i)
                for a in range(len(stmt)):
                    for b in range(a + 1, len(stmt)):
                        x, y = stmt[a], stmt[b]
                        self.frames[-1].d.add((min(x, y), max(x, y)))
            elif tok == "${":
                self.frames.append(Frame())
            elif tok == "$}":
                self.frames.pop()
            elif tok[0] != "$":
                label = tok
            else:
                raise MMError("unknown token " + tok)


def decompress(db, label):
    kind, assertion, proof = db.labels[label]
    dvs, f_hyps, e_labels, stmt = assertion
    mand = [lab for _, lab in f_hyps] + e_labels
    if not proof or proof[0] != "(":
        return list(proof)
    k = proof.index(")")
    refs = proof[1:k]
    letters = "".join(proof[k + 1:])
    labels = mand + refs
    nums = []
    cur = 0
    for ch in letters:
        if "A" <= ch <= "T":
            nums.append(20 * cur + ord(ch) - ord("A") + 1)
            cur = 0
        elif "U" <= ch <= "Y":
            cur = 5 * cur + ord(ch) - ord("U") + 1
        elif ch == "Z":
            nums.append(-1)
        else:
            raise MMError("bad letter " + ch)
    # Expand into a label sequence; saved subproofs are replayed in full.
    out = []
    saved = []  # list of label lists
    spans = []  # start index in out for each step pushed (stack of spans)
    for num in nums:
        if num == -1:
            if not spans:
                raise MMError("dangling Z")
            saved.append(out[spans[-1]:])
            continue
        if num <= len(labels):
            lab = labels[num - 1]
            start = len(out)
            out.append(lab)
            kindl = db.labels[lab][0]
            if kindl in ("$a", "$p"):
                nh = len(db.labels[lab][1][1]) + len(db.labels[lab][1][2])
                for _ in range(nh):
                    start = spans.pop()
                # the new span begins at the earliest popped operand
                spans.append(start if nh else len(out) - 1)
            else:
                spans.append(len(out) - 1)
        else:
            idx = num - len(labels) - 1
            if idx >= len(saved):
                raise MMError("index out of range")
            start = len(out)
            out.extend(saved[idx])
            spans.append(start)
    return out


def verify(db, label):
    kind, assertion, proof = db.labels[label]
    dvs0, f_hyps0, e_labels0, stmt0 = assertion
    seq = decompress(db, label)
    stack = []
    for lab in seq:
        entry = db.labels.get(lab)
        if entry is None:
            raise MMError("unknown label " + lab)
        k = entry[0]
        if k in ("$f", "$e"):
            stack.append(entry[1])
            continue
        dvs, f_hyps, e_labels, stmt = entry[1]
        npop = len(f_hyps) + len(e_labels)
        if len(stack) < npop:
            raise MMError("stack underflow at " + lab)
        args = stack[len(stack) - npop:]
        del stack[len(stack) - npop:]
        sub = {}
        for (var, flab), arg in zip(f_hyps, args):
            tc = db.labels[flab][1][0]
            if arg[0] != tc:
                raise MMError("typecode mismatch at " + lab)
            sub[var] = arg[1:]

        def apply(expr):
            out = []
            for t in expr:
                out.extend(sub.get(t, [t]))
            return out

        for elab, arg in zip(e_labels, args[len(f_hyps):]):
            if apply(db.labels[elab][1]) != arg:
                raise MMError("hypothesis mismatch at " + lab)
        for x, y in dvs:
            for a in sub[x]:
                for b in sub[y]:
                    if not db.lookup_v(a) or not db.lookup_v(b):
                        continue
                    if a == b or (min(a, b), max(a, b)) not in db.active_d[label]:
                        raise MMError("disjoint violation at " + lab)
        stack.append(apply(stmt))
    if len(stack) != 1:
        raise MMError("stack has %d entries at end" % len(stack))
    if stack[0] != stmt0:
        raise MMError("final statement mismatch")


def main(argv):
    path = argv[1]
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    db = Database()
    db.read(tokenize(text))
    if "--decompress" in argv:
        lab = argv[argv.index("--decompress") + 1]
        print(" ".join(decompress(db, lab)))
        return 0
    labels = [l for l in db.order if db.labels[l][0] == "$p"]
    if "--labels" in argv:
        labels = argv[argv.index("--labels") + 1].split(",")
    for lab in labels:
        try:
            verify(db, lab)
        except (MMError, KeyError, IndexError, ValueError) as exc:
            print("fail %s: %s" % (lab, exc))
            return 1
    print("ok %d" % len(labels))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
