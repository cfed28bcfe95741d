#!/usr/bin/env python3
"""Builds data/prop.mm from the theorem sketches in data/prop_src.txt.

Each theorem in the source is given as a statement plus a proof term such as
``mpd(h1, a1i(h2))``. The term is elaborated by first-order unification
against the statement, syntax (wff) construction steps are synthesized, and
the resulting proof is written in Metamath compressed format.

After the hand-written part, a deterministic extension stage derives further
theorems (deduction and closed forms, syllogism chains) to reach the target
statement count. Output is checked with tests/oracle/mmverify.py.

Usage: build_fragment.py [--src data/prop_src.txt] [--out data/prop.mm]
                         [--total N] [--seed S]
"""
import argparse
import os
import random
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "tests", "oracle"))
import mmverify  # noqa: E402


class BuildError(Exception):
    pass


# ---------------------------------------------------------------- terms

class Meta:
    __slots__ = ("id",)
    counter = 0

    def __init__(self):
        Meta.counter += 1
        self.id = Meta.counter

    def __repr__(self):
        return "?%d" % self.id


# A tree is either a variable name (str), a Meta, or a tuple (syntax_label, kids...)


def walk(t, s):
    while isinstance(t, Meta) and t in s:
        t = s[t]
    return t


def occurs(m, t, s):
    t = walk(t, s)
    if t is m:
        return True
    if isinstance(t, tuple):
        return any(occurs(m, k, s) for k in t[1:])
    return False


def unify(a, b, s):
    a = walk(a, s)
    b = walk(b, s)
    if a is b:
        return True
    if isinstance(a, Meta):
        if occurs(a, b, s):
            return False
        s[a] = b
        return True
    if isinstance(b, Meta):
        return unify(b, a, s)
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    if a[0] != b[0] or len(a) != len(b):
        return False
    return all(unify(x, y, s) for x, y in zip(a[1:], b[1:]))


def resolve(t, s, default="ph"):
    t = walk(t, s)
    if isinstance(t, Meta):
        s[t] = default
        return default
    if isinstance(t, str):
        return t
    return (t[0],) + tuple(resolve(k, s, default) for k in t[1:])


def instantiate(t, m):
    if isinstance(t, str):
        return m.get(t, t)
    return (t[0],) + tuple(instantiate(k, m) for k in t[1:])


def tree_vars(t, acc):
    if isinstance(t, str):
        acc.append(t)
    elif isinstance(t, tuple):
        for k in t[1:]:
            tree_vars(k, acc)
    return acc


def rename(t, m):
    if isinstance(t, str):
        return m[t]
    return (t[0],) + tuple(rename(k, m) for k in t[1:])


def tree_size(t):
    if isinstance(t, tuple):
        return 1 + sum(tree_size(k) for k in t[1:])
    return 1


# ---------------------------------------------------------------- database model

class Syntax:
    def __init__(self, label, typecode, pattern, var_order):
        self.label = label
        self.typecode = typecode
        self.pattern = pattern  # list of tokens
        self.var_order = var_order  # vars in mandatory order


class Assertion:
    def __init__(self, label, kind, hyps, concl, hyp_labels):
        self.label = label
        self.kind = kind  # "a" or "p"
        self.hyps = hyps  # list of trees
        self.concl = concl
        self.hyp_labels = hyp_labels
        self.vars = []
        self.depth = 0
        self.proof = None  # proof node


class Node:
    __slots__ = ("label", "subst", "kids", "hyp")

    def __init__(self, label, subst=None, kids=(), hyp=None):
        self.label = label
        self.subst = subst
        self.kids = kids
        self.hyp = hyp


class Builder:
    def __init__(self):
        self.out = []
        self.constants = []
        self.variables = []  # in declaration order
        self.float_label = {}
        self.syntax = {}  # label -> Syntax
        self.syntax_by_first = {}
        self.assertions = {}
        self.order = []  # assertion labels in order
        self.theorem_count = 0

    # ---- emission helpers
    def emit(self, line):
        self.out.append(line)

    # ---- expression parsing
    def parse(self, tokens, typecode="wff"):
        res = list(self._parse(tokens, 0, typecode))
        full = [t for t, end in res if end == len(tokens)]
        if len(full) != 1:
            raise BuildError("cannot parse '%s' (%d parses)" % (" ".join(tokens), len(full)))
        return full[0]

    def _parse(self, toks, pos, typecode):
        if pos < len(toks) and toks[pos] in self.float_label:
            yield toks[pos], pos + 1
        for syn in self.syntax_by_first.get(toks[pos] if pos < len(toks) else None, []):
            if syn.typecode != typecode:
                continue
            yield from self._parse_pattern(toks, pos, syn, 0, {})

    def _parse_pattern(self, toks, pos, syn, k, binding):
        if k == len(syn.pattern):
            kids = tuple(binding[v] for v in syn.var_order)
            yield (syn.label,) + kids, pos
            return
        sym = syn.pattern[k]
        if sym in self.float_label:
            for sub, end in self._parse(toks, pos, "wff"):
                nb = dict(binding)
                nb[sym] = sub
                yield from self._parse_pattern(toks, end, syn, k + 1, nb)
        else:
            if pos < len(toks) and toks[pos] == sym:
                yield from self._parse_pattern(toks, pos + 1, syn, k + 1, binding)

    def render(self, t):
        if isinstance(t, str):
            return [t]
        syn = self.syntax[t[0]]
        binding = dict(zip(syn.var_order, t[1:]))
        out = []
        for sym in syn.pattern:
            if sym in binding:
                out.extend(self.render(binding[sym]))
            else:
                out.append(sym)
        return out

    def syntax_rpn(self, t, acc):
        if isinstance(t, str):
            acc.append(self.float_label[t])
            return acc
        for k in t[1:]:
            self.syntax_rpn(k, acc)
        acc.append(t[0])
        return acc

    def ordered_vars(self, trees):
        seen = set()
        for t in trees:
            seen.update(tree_vars(t, []))
        return [v for v in self.variables if v in seen]

    # ---- declarations
    def declare_constants(self, toks):
        self.constants.extend(toks)
        self.emit("  $c %s $." % " ".join(toks))

    def declare_variables(self, toks):
        self.variables.extend(toks)
        self.emit("  $v %s $." % " ".join(toks))

    def declare_float(self, label, tc, var):
        self.float_label[var] = label
        self.emit("  %s $f %s %s $." % (label, tc, var))

    def declare_syntax(self, label, tc, pattern):
        var_order = [v for v in self.variables if v in pattern]
        syn = Syntax(label, tc, pattern, var_order)
        self.syntax[label] = syn
        self.syntax_by_first.setdefault(pattern[0], []).append(syn)
        self.emit("  %s $a %s %s $." % (label, tc, " ".join(pattern)))

    def add_assertion(self, label, kind, hyp_trees, concl, hyp_labels=None, proof_term=None, comment=None):
        if label in self.assertions or label in self.syntax:
            raise BuildError("duplicate label " + label)
        if hyp_labels is None:
            hyp_labels = ["%s.%d" % (label, i + 1) for i in range(len(hyp_trees))]
        a = Assertion(label, kind, hyp_trees, concl, hyp_labels)
        a.vars = self.ordered_vars(hyp_trees + [concl])
        if kind == "p":
            if isinstance(proof_term, Node):
                node = proof_term
            else:
                node = self.elaborate_root(a, proof_term)
            a.proof = node
            a.depth = 1 + max([self.assertions[r].depth for r in self.node_refs(node)] or [-1])
        lines = []
        if comment:
            lines.append("  $( %s $)" % comment)
        indent = "  "
        if hyp_trees:
            lines.append("  ${")
            indent = "    "
            for hl, h in zip(hyp_labels, hyp_trees):
                lines.append("%s%s $e |- %s $." % (indent, hl, " ".join(self.render(h))))
        body = " ".join(self.render(concl))
        if kind == "a":
            lines.append("%s%s $a |- %s $." % (indent, label, body))
        else:
            proof = self.compress(a, node)
            lines.append(self.wrap("%s%s $p |- %s $=" % (indent, label, body), proof, indent))
            self.theorem_count += 1
        if hyp_trees:
            lines.append("  $}")
        for ln in lines:
            self.emit(ln)
        self.assertions[label] = a
        self.order.append(label)
        return a

    def wrap(self, head, proof_tokens, indent):
        lines = [head]
        cur = indent + "  "
        for tok in proof_tokens + ["$."]:
            if len(cur) + len(tok) + 1 > 79 and cur.strip():
                lines.append(cur.rstrip())
                cur = indent + "  "
            cur += tok + " "
        lines.append(cur.rstrip())
        return "\n".join(lines)

    # ---- proof terms
    def parse_term(self, text):
        toks = []
        i = 0
        while i < len(text):
            c = text[i]
            if c.isspace():
                i += 1
            elif c in "(),{}=":
                toks.append(c)
                i += 1
            else:
                j = i
                while j < len(text) and not text[j].isspace() and text[j] not in "(),{}=":
                    j += 1
                toks.append(text[i:j])
                i = j
        pos = [0]

        def term():
            name = toks[pos[0]]
            pos[0] += 1
            subst = {}
            args = []
            if pos[0] < len(toks) and toks[pos[0]] == "{":
                pos[0] += 1
                while toks[pos[0]] != "}":
                    var = toks[pos[0]]
                    assert toks[pos[0] + 1] == "="
                    pos[0] += 2
                    expr = []
                    depth = 0
                    while not (depth == 0 and toks[pos[0]] in (",", "}")):
                        if toks[pos[0]] == "{":
                            depth += 1
                        expr.append(toks[pos[0]])
                        pos[0] += 1
                    subst[var] = expr
                    if toks[pos[0]] == ",":
                        pos[0] += 1
                pos[0] += 1
            if pos[0] < len(toks) and toks[pos[0]] == "(":
                pos[0] += 1
                while True:
                    args.append(term())
                    if toks[pos[0]] == ",":
                        pos[0] += 1
                        continue
                    assert toks[pos[0]] == ")", "expected ) in " + text
                    pos[0] += 1
                    break
            return (name, subst, args)

        t = term()
        if pos[0] != len(toks):
            raise BuildError("trailing tokens in term: " + text)
        return t

    def elaborate_root(self, a, term_text):
        term = self.parse_term(term_text)
        s = {}
        node = self.elaborate(term, a.concl, a, s)
        self.finish(node, s)
        return node

    def elaborate(self, term, expected, thm, s):
        name, subst, args = term
        if name.startswith("h") and name[1:].isdigit():
            idx = int(name[1:]) - 1
            if args:
                raise BuildError("hypothesis reference with arguments")
            if not unify(thm.hyps[idx], expected, s):
                raise BuildError("%s: hypothesis %s does not fit" % (thm.label, name))
            return Node(None, hyp=idx)
        if name not in self.assertions:
            raise BuildError("%s: unknown label %s" % (thm.label, name))
        fr = self.assertions[name]
        m = {v: Meta() for v in fr.vars}
        for var, expr in subst.items():
            s[m[var]] = self.parse(expr)
        if not unify(instantiate(fr.concl, m), expected, s):
            raise BuildError("%s: conclusion of %s does not unify with %s" % (
                thm.label, name, " ".join(self.render(resolve(expected, dict(s))))))
        if len(args) != len(fr.hyps):
            raise BuildError("%s: %s expects %d arguments" % (thm.label, name, len(fr.hyps)))
        kids = [self.elaborate(arg, instantiate(h, m), thm, s) for arg, h in zip(args, fr.hyps)]
        return Node(name, m, kids)

    def finish(self, node, s):
        if node.label is None:
            return
        node.subst = {v: resolve(t, s) for v, t in node.subst.items()}
        for k in node.kids:
            self.finish(k, s)

    def node_refs(self, node, acc=None):
        if acc is None:
            acc = set()
        if node.label is not None:
            acc.add(node.label)
            for k in node.kids:
                self.node_refs(k, acc)
        return acc

    def node_concl(self, node, thm):
        if node.label is None:
            return thm.hyps[node.hyp]
        return instantiate(self.assertions[node.label].concl, node.subst)

    # ---- rpn / compression
    def rpn_tree(self, node, thm):
        """Returns a nested (label, kids) tree including syntax steps."""
        if node.label is None:
            return (thm.hyp_labels[node.hyp], ())
        fr = self.assertions[node.label]
        kids = []
        for v in fr.vars:
            kids.append(self.syntax_tree(node.subst[v]))
        for k in node.kids:
            kids.append(self.rpn_tree(k, thm))
        return (node.label, tuple(kids))

    def syntax_tree(self, t):
        if isinstance(t, str):
            return (self.float_label[t], ())
        return (t[0], tuple(self.syntax_tree(k) for k in t[1:]))

    def compress(self, thm, node):
        tree = self.rpn_tree(node, thm)
        mand = [self.float_label[v] for v in thm.vars] + list(thm.hyp_labels)
        counts = {}

        def count(t):
            counts[t] = counts.get(t, 0) + 1
            if counts[t] == 1:
                for k in t[1]:
                    count(k)

        count(tree)
        refs = []

        def collect(t):
            if t[0] not in mand and t[0] not in refs:
                for k in t[1]:
                    collect(k)
                if t[0] not in refs:
                    refs.append(t[0])
            else:
                for k in t[1]:
                    collect(k)

        collect(tree)
        base = mand + refs
        saved = {}
        letters = []

        def enc(n):
            s = chr(ord("A") + (n - 1) % 20)
            n = (n - 1) // 20
            while n > 0:
                s = chr(ord("U") + (n - 1) % 5) + s
                n = (n - 1) // 5
            return s

        def emit(t):
            if t in saved:
                letters.append(enc(len(base) + saved[t]))
                return
            for k in t[1]:
                emit(k)
            letters.append(enc(base.index(t[0]) + 1))
            if counts[t] > 1 and t[1]:
                letters.append("Z")
                saved[t] = len(saved) + 1

        emit(tree)
        text = "".join(letters)
        chunks = [text[i:i + 60] for i in range(0, len(text), 60)]
        return ["("] + refs + [")"] + chunks


# ---------------------------------------------------------------- source reader

def read_source(b, path):
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().split("\n")
    # join continuation lines (leading whitespace)
    lines = []
    for ln in raw:
        if not ln.strip() or ln.lstrip().startswith("#"):
            continue
        if ln[0].isspace() and lines:
            lines[-1] += " " + ln.strip()
        else:
            lines.append(ln.strip())
    pending_comment = None
    for ln in lines:
        kw, _, rest = ln.partition(" ")
        if kw == "section":
            b.emit("")
            b.emit("  $( " + "=" * 60)
            b.emit("     " + rest)
            b.emit("     " + "=" * 60 + " $)")
            b.emit("")
        elif kw == "note":
            pending_comment = rest
        elif kw == "const":
            b.declare_constants(rest.split())
        elif kw == "var":
            b.declare_variables(rest.split())
        elif kw == "float":
            lab, tc, var = rest.split()
            b.declare_float(lab, tc, var)
        elif kw == "syntax":
            toks = rest.split()
            b.declare_syntax(toks[0], toks[1], toks[2:])
        elif kw in ("axiom", "thm"):
            label, _, rest2 = rest.partition(":")
            label = label.strip()
            hyp_labels = None
            if "(" in label:
                label, _, hl = label.partition("(")
                hyp_labels = hl.rstrip(")").split()
                label = label.strip()
            if kw == "thm":
                stmt, _, term = rest2.partition(":=")
            else:
                stmt, term = rest2, None
            hyps_text, arrow, concl_text = stmt.partition("=>")
            if not arrow:
                concl_text, hyps_text = hyps_text, ""
            hyps = [b.parse(h.split()) for h in hyps_text.split(";") if h.strip()]
            concl = b.parse(concl_text.split())
            b.add_assertion(label, "a" if kw == "axiom" else "p", hyps, concl, hyp_labels,
                            term.strip() if term else None, pending_comment)
            pending_comment = None
        else:
            raise BuildError("unknown directive: " + ln)


# ---------------------------------------------------------------- extension stage

class Extender:
    """Derives additional theorems from the hand-written core.

    Families: inference forms of closed implications (ax-mp), deduction forms
    (syl / syl6 / sylbi style), contrapositives, commuted antecedents and
    syllogism chains between closed implications. Statements are kept
    small, fresh up to variable renaming, and emitted in increasing depth.
    """

    def __init__(self, b, rng):
        self.b = b
        self.rng = rng
        self.seen = set()
        for lab in b.order:
            a = b.assertions[lab]
            self.seen.add(self.key(a.hyps, a.concl))
        self.counter = 0

    def key(self, hyps, concl):
        best = None
        import itertools
        perms = itertools.permutations(hyps) if len(hyps) <= 4 else [hyps]
        for perm in perms:
            m = {}
            for v in tree_vars(concl, []) + [x for h in perm for x in tree_vars(h, [])]:
                if v not in m:
                    m[v] = "v%d" % len(m)
            k = (repr(rename(concl, m)), tuple(repr(rename(h, m)) for h in perm))
            if best is None or k < best:
                best = k
        return best

    def normalize(self, hyps, concl):
        m = {}
        for v in tree_vars(concl, []) + [x for h in hyps for x in tree_vars(h, [])]:
            if v not in m:
                m[v] = self.b.variables[len(m)]
        return [rename(h, m) for h in hyps], rename(concl, m)

    def fresh_var(self, trees):
        used = set()
        for t in trees:
            used.update(tree_vars(t, []))
        for v in self.b.variables:
            if v not in used:
                return v
        return None

    def is_imp(self, t):
        return isinstance(t, tuple) and t[0] == "wi"

    def candidates(self, lab):
        b = self.b
        a = b.assertions[lab]
        out = []
        if not a.hyps and self.is_imp(a.concl):
            ant, con = a.concl[1], a.concl[2]
            # inference form: ant => con
            out.append(("i", [ant], con, "ax-mp(h1, %s)" % lab))
            # deduction form: ( x -> ant ) => ( x -> con )
            x = self.fresh_var([a.concl])
            if x:
                out.append(("d", [("wi", x, ant)], ("wi", x, con), "syl(h1, %s)" % lab))
            # contrapositive
            out.append(("c", [], ("wi", ("wn", con), ("wn", ant)), "con3i(%s)" % lab))
            if self.is_imp(con):
                out.append(("m", [], ("wi", con[1], ("wi", ant, con[2])), "com12(%s)" % lab))
        if len(a.hyps) == 1 and not self.is_trivial(a):
            x = self.fresh_var(a.hyps + [a.concl])
            if x:
                # prefix an antecedent to the conclusion
                out.append(("a", list(a.hyps), ("wi", x, a.concl), "a1i(%s(h1))" % lab))
        return out

    def is_trivial(self, a):
        return False

    def chain(self, lab1, lab2):
        """syl(lab1, lab2) when the consequent of lab1 unifies with the antecedent of lab2."""
        b = self.b
        a1 = b.assertions[lab1]
        a2 = b.assertions[lab2]
        if a1.hyps or a2.hyps or not self.is_imp(a1.concl) or not self.is_imp(a2.concl):
            return None
        m1 = {v: Meta() for v in a1.vars}
        m2 = {v: Meta() for v in a2.vars}
        s = {}
        c1 = instantiate(a1.concl, m1)
        c2 = instantiate(a2.concl, m2)
        if not unify(c1[2], c2[1], s):
            return None
        concl = resolve(("wi", c1[1], c2[2]), s)
        # rename leftover metas (already defaulted to ph) are fine
        return concl

    def accept(self, hyps, concl):
        size = tree_size(concl) + sum(tree_size(h) for h in hyps)
        if size > 25:
            return False
        if len(set(tree_vars(concl, []) + [v for h in hyps for v in tree_vars(h, [])])) > 5:
            return False
        k = self.key(hyps, concl)
        if k in self.seen:
            return False
        self.seen.add(k)
        return True

    def label(self, kind):
        self.counter += 1
        return "x%s%d" % (kind, self.counter)

    def run(self, total, section_every=150):
        b = self.b
        stalls = 0
        pool = [lab for lab in b.order if b.assertions[lab].kind == "p"]
        closed = [lab for lab in pool if not b.assertions[lab].hyps]
        written = 0
        part = 0
        while b.theorem_count < total:
            if written // section_every == part:
                part += 1
                b.emit("")
                b.emit("  $( Derived forms, part %d $)" % part)
            recent = pool[-120:]
            lab = self.rng.choice(recent)
            made = False
            if self.rng.random() < 0.45:
                # syllogism chain with a shallower closed implication
                partners = [c for c in closed if b.assertions[c].depth <= 12]
                if partners:
                    other = self.rng.choice(partners)
                    order = (lab, other) if self.rng.random() < 0.5 else (other, lab)
                    concl = self.chain(*order)
                    if concl is not None:
                        hyps, concl = self.normalize([], concl)
                        if self.accept(hyps, concl):
                            a = self.try_add(self.label("s"), hyps, concl,
                                             "syl(%s, %s)" % order)
                            made = a is not None
            if not made:
                cands = self.candidates(lab)
                self.rng.shuffle(cands)
                for kind, hyps, concl, term in cands:
                    nh, nc = self.normalize(hyps, concl)
                    if not self.accept(nh, nc):
                        continue
                    # the proof term refers to the original variable names, so
                    # elaborate against the un-normalized statement, then rename
                    a = self.try_add(self.label(kind), hyps, concl, term)
                    if a is not None:
                        made = True
                        break
            if made:
                written += 1
                stalls = 0
                newlab = b.order[-1]
                pool.append(newlab)
                if not b.assertions[newlab].hyps:
                    closed.append(newlab)
            else:
                stalls += 1
                if stalls > 20000:
                    raise BuildError("extension stalled at %d theorems" % b.theorem_count)

    def try_add(self, label, hyps, concl, term):
        b = self.b
        try:
            return b.add_assertion(label, "p", hyps, concl, None, term)
        except BuildError:
            return None


def main(argv):
    ap = argparse.ArgumentParser()
    ap.add_argument("--src", default=os.path.join(HERE, "prop_src.txt"))
    ap.add_argument("--out", default=os.path.join(HERE, "prop.mm"))
    ap.add_argument("--total", type=int, default=0, help="extend to this many $p statements")
    ap.add_argument("--seed", type=int, default=20240501)
    args = ap.parse_args(argv[1:])
    b = Builder()
    b.emit("$( Propositional calculus fragment in the style of set.mm.")
    b.emit("   Generated by data/build_fragment.py; do not edit by hand. $)")
    b.emit("")
    read_source(b, args.src)
    core = b.theorem_count
    if args.total > b.theorem_count:
        Extender(b, random.Random(args.seed)).run(args.total)
    text = "\n".join(b.out) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    db = mmverify.Database()
    db.read(mmverify.tokenize(text))
    bad = 0
    for lab in db.order:
        if db.labels[lab][0] != "$p":
            continue
        try:
            mmverify.verify(db, lab)
        except mmverify.MMError as exc:
            print("verify failed: %s: %s" % (lab, exc), file=sys.stderr)
            bad += 1
    print("core theorems: %d, total theorems: %d, failures: %d" % (core, b.theorem_count, bad))
    maxd = max(a.depth for a in b.assertions.values())
    print("max depth: %d" % maxd)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
