//! Program texts for the experiment domains.

use std::fmt::Write;

pub const DIGITS: &str = "\
% sum of two digit images
img(d1). img(d2).
nn(digit(1, X), [0,1,2,3,4,5,6,7,8,9]) :- img(X).
addition(A, B, N) :- digit_1(A) = N1, digit_1(B) = N2, N = N1 + N2.
";

/// One network reading both images at once and naming the sum.
pub fn digits_baseline() -> String {
    let values: Vec<String> = (0..19).map(|s| s.to_string()).collect();
    format!("% direct 19-way classifier over both images\nnn(sum(1, p), [{}]).\n", values.join(","))
}

/// Standard 4x4 Sudoku over a 16-cell recognition network.
pub fn sudoku4() -> String {
    let mut s = String::from("% 4x4 sudoku; cell I is row (I-1)/4, column (I-1) mod 4\n");
    s.push_str("nn(cell(16, img), [1,2,3,4]).\n");
    for i in 0..16 {
        let (r, c) = (i / 4, i % 4);
        writeln!(s, "pos({}, {r}, {c}). box({r}, {c}, {}).", i + 1, (r / 2) * 2 + c / 2).unwrap();
    }
    s.push_str(
        "a(R, C, N) :- cell(I, img, N), pos(I, R, C).
:- a(R, C1, N), a(R, C2, N), C1 < C2.
:- a(R1, C, N), a(R2, C, N), R1 < R2.
:- a(R1, C1, N), a(R2, C2, N), box(R1, C1, B), box(R2, C2, B), R1 < R2.
",
    );
    s
}

pub const ANTI_KNIGHT_RULE: &str =
    ":- a(R1, C1, N), a(R2, C2, N), (R1 - R2) * (R1 - R2) + (C1 - C2) * (C1 - C2) = 5.\n";

pub fn sudoku4_anti_knight() -> String {
    format!("{}{ANTI_KNIGHT_RULE}", sudoku4())
}

/// Image-object size reasoning with a default: boxes are related like their
/// labels unless the measured sizes say otherwise.
pub const COMMONSENSE: &str = "\
smaller(cat, person). smaller(person, car). smaller(person, truck).
smaller(X, Y) :- smaller(X, Z), smaller(Z, Y).

box(i1, b1). box(i1, b2).
nn(label(1, I, B), [cat, person, car, truck]) :- box(I, B).

% measured sizes, when known
smaller(I, B1, B2) :- area(I, B1, A1), area(I, B2, A2), A1 < A2.
-smaller(I, B2, B1) :- area(I, B1, A1), area(I, B2, A2), A1 < A2.

smaller(I, B1, B2) :- not -smaller(I, B1, B2), label_1(I, B1) = L1, label_1(I, B2) = L2, smaller(L1, L2).

toy(I, B1) :- label_1(I, B1) = car, label_1(I, B2) = person, smaller(I, B1, B2).
";

/// Size evidence: the car box is smaller than the person box.
pub const COMMONSENSE_EVIDENCE: &str = "area(i1, b1, 20). area(i1, b2, 100).\n";

/// Constraint groups of the shortest-path program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathRules {
    /// Every node touches 0 or 2 chosen edges.
    pub simple: bool,
    /// Chosen edges form one connected piece.
    pub reach: bool,
    /// Fewest chosen edges.
    pub optimize: bool,
    /// Removed edges are never chosen.
    pub no_removed: bool,
}

impl PathRules {
    pub const NONE: PathRules = PathRules { simple: false, reach: false, optimize: false, no_removed: false };
    pub const P: PathRules = PathRules { simple: true, ..PathRules::NONE };
    pub const PRO: PathRules = PathRules { simple: true, reach: true, optimize: true, no_removed: false };
    pub const PRONR: PathRules = PathRules { no_removed: true, ..PathRules::PRO };
}

/// Grid nodes are `0..16` row-major; edge `k` (1-based) joins
/// `GRID_EDGES[k - 1]`. Horizontal edges come first.
pub const GRID_EDGES: [(usize, usize); 24] = grid_edges();

const fn grid_edges() -> [(usize, usize); 24] {
    let mut out = [(0, 0); 24];
    let mut k = 0;
    let mut r = 0;
    while r < 4 {
        let mut c = 0;
        while c < 3 {
            out[k] = (r * 4 + c, r * 4 + c + 1);
            k += 1;
            c += 1;
        }
        r += 1;
    }
    let mut r = 0;
    while r < 3 {
        let mut c = 0;
        while c < 4 {
            out[k] = (r * 4 + c, (r + 1) * 4 + c);
            k += 1;
            c += 1;
        }
        r += 1;
    }
    out
}

/// The shortest-path program. Instances add `sp(external, S).`,
/// `sp(external, E).` and `removed(K).` facts.
pub fn gridpath(rules: PathRules) -> String {
    let mut s = String::from("nn(sp(24, g), [true, false]).\n");
    for (k, (u, v)) in GRID_EDGES.iter().enumerate() {
        writeln!(s, "sp({u}, {v}) :- sp({}, g, true).", k + 1).unwrap();
    }
    s.push_str("sp(X, Y) :- sp(Y, X).\n");
    if rules.no_removed {
        s.push_str(":- sp(X, g, true), removed(X).\n");
    }
    if rules.simple {
        s.push_str(":- X = 0..15, #count{Y: sp(X, Y)} = 1.\n:- X = 0..15, #count{Y: sp(X, Y)} >= 3.\n");
    }
    if rules.reach {
        s.push_str(
            "reachable(X, Y) :- sp(X, Y).\nreachable(X, Y) :- reachable(X, Z), sp(Z, Y).\n:- sp(X, A), sp(Y, B), not reachable(X, Y).\n",
        );
    }
    if rules.optimize {
        s.push_str(":~ sp(X, g, true). [1, X]\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use neurasp::ground::ground;
    use neurasp::lang::parse_program;

    fn grounds(src: &str) {
        let p = parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
        ground(&p).unwrap_or_else(|e| panic!("{e}\n{src}"));
    }

    #[test]
    fn all_programs_ground() {
        grounds(DIGITS);
        grounds(&digits_baseline());
        grounds(&sudoku4());
        grounds(&sudoku4_anti_knight());
        grounds(COMMONSENSE);
        grounds(&format!("{COMMONSENSE}{COMMONSENSE_EVIDENCE}"));
        for r in [PathRules::NONE, PathRules::P, PathRules::PRO, PathRules::PRONR] {
            grounds(&format!("{}sp(external, 0). sp(external, 15). removed(3).\n", gridpath(r)));
        }
    }

    #[test]
    fn grid_edges_are_unit_steps() {
        for &(u, v) in &GRID_EDGES {
            let (ru, cu, rv, cv) = (u / 4, u % 4, v / 4, v % 4);
            assert_eq!(ru.abs_diff(rv) + cu.abs_diff(cv), 1);
            assert!(u < v);
        }
        let mut sorted = GRID_EDGES.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
    }

    #[test]
    fn anti_knight_is_one_more_statement() {
        let base = parse_program(&sudoku4()).unwrap();
        let ak = parse_program(&sudoku4_anti_knight()).unwrap();
        assert_eq!(ak.asp_rules.len(), base.asp_rules.len() + 1);
        assert_eq!(ak.neural_rules.len(), base.neural_rules.len());
    }
}
