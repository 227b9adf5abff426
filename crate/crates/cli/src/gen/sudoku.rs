//! 4x4 Sudoku boards with per-cell digit probabilities.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Digits 1..=4; 0 marks a blank.
pub type Grid = [[u8; 4]; 4];

fn allowed(g: &Grid, r: usize, c: usize, v: u8) -> bool {
    for k in 0..4 {
        if g[r][k] == v || g[k][c] == v {
            return false;
        }
    }
    let (br, bc) = (r / 2 * 2, c / 2 * 2);
    for rr in br..br + 2 {
        for cc in bc..bc + 2 {
            if g[rr][cc] == v {
                return false;
            }
        }
    }
    true
}

/// Solutions of `puzzle` in search order, at most `limit`.
pub fn solutions(puzzle: &Grid, limit: usize) -> Vec<Grid> {
    fn go(g: &mut Grid, out: &mut Vec<Grid>, limit: usize) {
        if out.len() >= limit {
            return;
        }
        let Some(i) = (0..16).find(|&i| g[i / 4][i % 4] == 0) else {
            out.push(*g);
            return;
        };
        let (r, c) = (i / 4, i % 4);
        for v in 1..=4 {
            if allowed(g, r, c, v) {
                g[r][c] = v;
                go(g, out, limit);
                g[r][c] = 0;
            }
        }
    }
    let mut g = *puzzle;
    let mut out = Vec::new();
    go(&mut g, &mut out, limit);
    out
}

fn random_solution(rng: &mut ChaCha8Rng) -> Grid {
    let mut g = [[0; 4]; 4];
    let mut out = Vec::new();
    fn go(g: &mut Grid, out: &mut Vec<Grid>, rng: &mut ChaCha8Rng) {
        if !out.is_empty() {
            return;
        }
        let Some(i) = (0..16).find(|&i| g[i / 4][i % 4] == 0) else {
            out.push(*g);
            return;
        };
        let mut vals = [1u8, 2, 3, 4];
        vals.shuffle(rng);
        for v in vals {
            if allowed(g, i / 4, i % 4, v) {
                g[i / 4][i % 4] = v;
                go(g, out, rng);
                g[i / 4][i % 4] = 0;
            }
        }
    }
    go(&mut g, &mut out, rng);
    out[0]
}

/// Blanks cells in random order as long as the solution stays unique.
fn make_puzzle(solution: &Grid, rng: &mut ChaCha8Rng) -> Grid {
    let mut p = *solution;
    let mut cells: Vec<usize> = (0..16).collect();
    cells.shuffle(rng);
    for i in cells {
        let keep = p[i / 4][i % 4];
        p[i / 4][i % 4] = 0;
        if solutions(&p, 2).len() != 1 {
            p[i / 4][i % 4] = keep;
        }
    }
    p
}

/// True if no two cells a knight move apart hold the same digit.
pub fn anti_knight_ok(g: &Grid) -> bool {
    for a in 0..16 {
        for b in 0..16 {
            let (dr, dc) = ((a / 4) as i32 - (b / 4) as i32, (a % 4) as i32 - (b % 4) as i32);
            if dr * dr + dc * dc == 5 && g[a / 4][a % 4] == g[b / 4][b % 4] {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SudokuBoard {
    pub puzzle: Grid,
    pub solution: Grid,
    /// 16 rows of digit probabilities, cell order row-major.
    pub rows: Vec<Vec<f64>>,
    /// As `rows`, with one given cell's most likely digit moved onto a digit
    /// already given in its row.
    pub perturbed_rows: Vec<Vec<f64>>,
    /// `(row, column)` of the perturbed cell.
    pub perturbed_cell: (usize, usize),
}

/// Probability row peaked at `top` with mass in `[mass, 0.95]`.
fn peaked(top: usize, second: Option<usize>, mass: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = rng.random_range(mass..=mass.max(0.95));
    let rest = 1.0 - m;
    let mut row = vec![0.0; 4];
    row[top] = m;
    match second {
        Some(s) => {
            row[s] = rest * 0.6;
            for (j, x) in row.iter_mut().enumerate() {
                if j != top && j != s {
                    *x = rest * 0.2;
                }
            }
        }
        None => {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            let mut k = 0;
            for (j, x) in row.iter_mut().enumerate() {
                if j != top {
                    *x = rest * w[k] / total;
                    k += 1;
                }
            }
        }
    }
    row
}

/// `count` boards with unique solutions. Given cells put at least `mass` on
/// their digit; blank cells are uniform.
pub fn gen_sudoku4(count: usize, mass: f64, seed: u64) -> Vec<SudokuBoard> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let solution = random_solution(&mut rng);
        let puzzle = make_puzzle(&solution, &mut rng);
        // a perturbable cell is a given with another given in its row
        let candidates: Vec<(usize, usize, usize)> = (0..16)
            .filter_map(|i| {
                let (r, c) = (i / 4, i % 4);
                if puzzle[r][c] == 0 {
                    return None;
                }
                (0..4).find(|&k| k != c && puzzle[r][k] != 0).map(|k| (r, c, k))
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let (pr, pc, other) = candidates[rng.random_range(0..candidates.len())];
        let mut rows = Vec::with_capacity(16);
        let mut perturbed_rows = Vec::with_capacity(16);
        for i in 0..16 {
            let (r, c) = (i / 4, i % 4);
            let given = puzzle[r][c];
            if given == 0 {
                rows.push(vec![0.25; 4]);
                perturbed_rows.push(vec![0.25; 4]);
                continue;
            }
            let row = peaked(given as usize - 1, None, mass, &mut rng);
            if (r, c) == (pr, pc) {
                let wrong = puzzle[r][other] as usize - 1;
                perturbed_rows.push(peaked(wrong, Some(given as usize - 1), mass, &mut rng));
            } else {
                perturbed_rows.push(row.clone());
            }
            rows.push(row);
        }
        out.push(SudokuBoard {
            puzzle,
            solution,
            rows,
            perturbed_rows,
            perturbed_cell: (pr, pc),
        });
    }
    out
}

/// A board whose most likely reading is a valid Sudoku that breaks the
/// anti-knight rule, so adding that rule must change the MAP reading.
/// Returns the rows and that reading.
pub fn crafted_anti_knight_board() -> (Vec<Vec<f64>>, Grid) {
    let all = solutions(&[[0; 4]; 4], usize::MAX);
    let standard = *all.iter().find(|g| !anti_knight_ok(g)).expect("some grid breaks the knight rule");
    let rows = (0..16)
        .map(|i| {
            let mut row = vec![0.1; 4];
            row[standard[i / 4][i % 4] as usize - 1] = 0.7;
            row
        })
        .collect();
    (rows, standard)
}
