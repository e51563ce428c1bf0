//! Seeded instance generators for the built-in domains.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::task::{BfsOutcome, Task};
use super::DomainId;
use crate::pddl::{GroundAtom, ProblemDef, State};

/// Size parameters, one variant per domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Size {
    /// 3–5 (simple) or 10–20 (hard) blocks.
    Blocksworld { blocks: usize },
    /// 2–3 painted rows, 3–5 columns, 1–2 robots; always two colors.
    Floortile { rows: usize, cols: usize, robots: usize },
    /// 4–5 curbs, 4–6 cars.
    Parking { curbs: usize, cars: usize },
    /// 4x4 or 6x6 grid.
    Tetris { grid: usize },
    /// 4–5 floors, 4–12 passengers, one slow and one fast elevator.
    Elevator { floors: usize, passengers: usize },
    /// 2–3 cocktails.
    Barman { cocktails: usize },
}

impl Size {
    pub fn domain(&self) -> DomainId {
        match self {
            Size::Blocksworld { .. } => DomainId::Blocksworld,
            Size::Floortile { .. } => DomainId::Floortile,
            Size::Parking { .. } => DomainId::Parking,
            Size::Tetris { .. } => DomainId::Tetris,
            Size::Elevator { .. } => DomainId::Elevator,
            Size::Barman { .. } => DomainId::Barman,
        }
    }

    /// The smallest evaluated size of each domain.
    pub fn smallest(id: DomainId) -> Size {
        match id {
            DomainId::Blocksworld => Size::Blocksworld { blocks: 3 },
            DomainId::Floortile => Size::Floortile { rows: 2, cols: 3, robots: 1 },
            DomainId::Parking => Size::Parking { curbs: 4, cars: 4 },
            DomainId::Tetris => Size::Tetris { grid: 4 },
            DomainId::Elevator => Size::Elevator { floors: 4, passengers: 4 },
            DomainId::Barman => Size::Barman { cocktails: 2 },
        }
    }

    pub fn check(&self) -> Result<(), GenError> {
        let bad = |what: &str, v: usize, range: &str| {
            Err(GenError::Range(format!("{what} = {v}, expected {range}")))
        };
        match *self {
            Size::Blocksworld { blocks } if !(3..=5).contains(&blocks) && !(10..=20).contains(&blocks) => {
                bad("blocks", blocks, "3-5 or 10-20")
            }
            Size::Floortile { rows, .. } if !(2..=3).contains(&rows) => bad("rows", rows, "2-3"),
            Size::Floortile { cols, .. } if !(3..=5).contains(&cols) => bad("cols", cols, "3-5"),
            Size::Floortile { robots, .. } if !(1..=2).contains(&robots) => bad("robots", robots, "1-2"),
            Size::Parking { curbs, .. } if !(4..=5).contains(&curbs) => bad("curbs", curbs, "4-5"),
            Size::Parking { cars, .. } if !(4..=6).contains(&cars) => bad("cars", cars, "4-6"),
            Size::Tetris { grid } if grid != 4 && grid != 6 => bad("grid", grid, "4 or 6"),
            Size::Elevator { floors, .. } if !(4..=5).contains(&floors) => bad("floors", floors, "4-5"),
            Size::Elevator { passengers, .. } if !(4..=12).contains(&passengers) => {
                bad("passengers", passengers, "4-12")
            }
            Size::Barman { cocktails } if !(2..=3).contains(&cocktails) => bad("cocktails", cocktails, "2-3"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GenParams {
    pub size: Size,
    pub seed: u64,
}

impl GenParams {
    pub fn new(size: Size, seed: u64) -> Self {
        GenParams { size, seed }
    }

    /// Smallest evaluated sizes; blocksworld draws 3–5 blocks from the seed.
    pub fn small(id: DomainId, seed: u64) -> Self {
        let size = match id {
            DomainId::Blocksworld => Size::Blocksworld {
                blocks: 3 + (splitmix(seed) % 3) as usize,
            },
            _ => Size::smallest(id),
        };
        GenParams { size, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("size out of range: {0}")]
    Range(String),
    #[error("no solvable {0} instance after {1} attempts")]
    Unsolvable(DomainId, usize),
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub const MAX_RETRIES: usize = 100;
const CHECK_NODE_LIMIT: usize = 300_000;

/// Generate a solvable instance. The seed fully determines the output; when
/// a candidate is unsolvable the seed is perturbed and generation repeats, at
/// most [`MAX_RETRIES`] times.
pub fn gen_instance(id: DomainId, params: &GenParams) -> Result<ProblemDef, GenError> {
    if params.size.domain() != id {
        return Err(GenError::Range(format!(
            "size parameters are for {}, not {id}",
            params.size.domain()
        )));
    }
    params.size.check()?;
    let domain = id.domain();
    for attempt in 0..=MAX_RETRIES {
        let seed = if attempt == 0 {
            params.seed
        } else {
            splitmix(params.seed ^ attempt as u64)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut problem = build(params.size, &mut rng);
        problem.name = format!("{id}-{}", params.seed);
        let task = Task::new(&domain, &problem);
        if task.is_goal(task.init()) {
            continue;
        }
        match task.bfs(task.init(), None, CHECK_NODE_LIMIT) {
            BfsOutcome::Found(_) => return Ok(problem),
            BfsOutcome::Exhausted => continue,
            // Everything except floortile is solvable by construction.
            BfsOutcome::LimitHit if id != DomainId::Floortile => return Ok(problem),
            BfsOutcome::LimitHit => continue,
        }
    }
    Err(GenError::Unsolvable(id, MAX_RETRIES + 1))
}

struct Builder {
    domain: &'static str,
    objects: BTreeMap<String, String>,
    init: BTreeSet<GroundAtom>,
    goal: BTreeSet<GroundAtom>,
}

impl Builder {
    fn new(domain: &'static str) -> Self {
        Builder {
            domain,
            objects: BTreeMap::new(),
            init: BTreeSet::new(),
            goal: BTreeSet::new(),
        }
    }

    fn obj(&mut self, name: &str, ty: &str) {
        self.objects.insert(name.to_string(), ty.to_string());
    }

    fn init(&mut self, p: &str, args: &[&str]) {
        self.init.insert(GroundAtom::new(p, args));
    }

    fn goal(&mut self, p: &str, args: &[&str]) {
        self.goal.insert(GroundAtom::new(p, args));
    }

    fn finish(self) -> ProblemDef {
        ProblemDef {
            name: String::new(),
            domain_name: self.domain.to_string(),
            objects: self.objects,
            init: State { atoms: self.init },
            goal_pos: self.goal,
            goal_neg: BTreeSet::new(),
        }
    }
}

fn build(size: Size, rng: &mut ChaCha8Rng) -> ProblemDef {
    match size {
        Size::Blocksworld { blocks } => blocksworld(blocks, rng),
        Size::Floortile { rows, cols, robots } => floortile(rows, cols, robots, rng),
        Size::Parking { curbs, cars } => parking(curbs, cars, rng),
        Size::Tetris { grid } => tetris(grid, rng),
        Size::Elevator { floors, passengers } => elevator(floors, passengers, rng),
        Size::Barman { cocktails } => barman(cocktails, rng),
    }
}

/// Random towers: a shuffled order cut into stacks, bottom first.
fn towers(names: &[String], rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let mut order = names.to_vec();
    order.shuffle(rng);
    let mut out: Vec<Vec<String>> = Vec::new();
    for b in order {
        match out.last_mut() {
            Some(t) if rng.random_bool(0.5) => t.push(b),
            _ => out.push(vec![b]),
        }
    }
    out
}

fn blocksworld(n: usize, rng: &mut ChaCha8Rng) -> ProblemDef {
    let names: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    let mut b = Builder::new("blocksworld");
    for x in &names {
        b.obj(x, "block");
    }
    for t in towers(&names, rng) {
        b.init("ontable", &[&t[0]]);
        for w in t.windows(2) {
            b.init("on", &[&w[1], &w[0]]);
        }
        b.init("clear", &[t.last().unwrap()]);
    }
    b.init("handempty", &[]);
    loop {
        let goal = towers(&names, rng);
        if goal.iter().any(|t| t.len() > 1) {
            for t in goal {
                for w in t.windows(2) {
                    b.goal("on", &[&w[1], &w[0]]);
                }
            }
            break;
        }
    }
    b.finish()
}

pub(crate) fn tile(r: usize, c: usize) -> String {
    format!("tile_{r}-{c}")
}

fn floortile(rows: usize, cols: usize, robots: usize, rng: &mut ChaCha8Rng) -> ProblemDef {
    let mut b = Builder::new("floortile");
    // Row 0 is an unpainted bottom row; rows 1..=rows are to be painted.
    let mut tiles = Vec::new();
    for r in 0..=rows {
        for c in 0..cols {
            tiles.push((r, c));
            b.obj(&tile(r, c), "tile");
        }
    }
    for col in ["white", "black"] {
        b.obj(col, "color");
        b.init("available-color", &[col]);
    }
    for &(r, c) in &tiles {
        let t = tile(r, c);
        if r < rows {
            b.init("up", &[&tile(r + 1, c), &t]);
            b.init("down", &[&t, &tile(r + 1, c)]);
        }
        if c + 1 < cols {
            b.init("right", &[&tile(r, c + 1), &t]);
            b.init("left", &[&t, &tile(r, c + 1)]);
        }
    }
    let occupied: Vec<(usize, usize)> = tiles.choose_multiple(rng, robots).copied().collect();
    for (i, &(r, c)) in occupied.iter().enumerate() {
        let name = format!("robot{}", i + 1);
        b.obj(&name, "robot");
        b.init("robot-at", &[&name, &tile(r, c)]);
        let color = if rng.random_bool(0.5) { "white" } else { "black" };
        b.init("robot-has", &[&name, color]);
    }
    for &(r, c) in &tiles {
        if !occupied.contains(&(r, c)) {
            b.init("clear", &[&tile(r, c)]);
        }
        if r >= 1 {
            let color = if (r + c) % 2 == 0 { "white" } else { "black" };
            b.goal("painted", &[&tile(r, c), color]);
        }
    }
    b.finish()
}

/// Replace the goal with the fluent atoms of `preds` in a state reached by a
/// random walk from the initial state.
fn walk_goal(id: DomainId, problem: &mut ProblemDef, preds: &[&str], steps: usize, rng: &mut ChaCha8Rng) {
    let domain = id.domain();
    let task = Task::new(&domain, problem);
    let mut cur = task.init().clone();
    for _ in 0..steps {
        let succ = task.successors(&cur);
        match succ.choose(rng) {
            Some((_, next)) => cur = next.clone(),
            None => break,
        }
    }
    let end = task.decode(&cur);
    problem.goal_pos = end
        .atoms
        .into_iter()
        .filter(|a| preds.contains(&a.predicate.as_str()))
        .collect();
}

fn parking(curbs: usize, cars: usize, rng: &mut ChaCha8Rng) -> ProblemDef {
    let mut b = Builder::new("parking");
    let curb_names: Vec<String> = (0..curbs).map(|i| format!("curb{i}")).collect();
    let car_names: Vec<String> = (0..cars).map(|i| format!("car{i}")).collect();
    for c in &curb_names {
        b.obj(c, "curb");
    }
    for c in &car_names {
        b.obj(c, "car");
    }
    let mut slots: Vec<Vec<&String>> = vec![Vec::new(); curbs];
    let mut order: Vec<&String> = car_names.iter().collect();
    order.shuffle(rng);
    for car in order {
        let open: Vec<usize> = (0..curbs).filter(|&i| slots[i].len() < 2).collect();
        let i = *open.choose(rng).expect("cars fit: at most 2 per curb");
        slots[i].push(car);
    }
    for (i, s) in slots.iter().enumerate() {
        match s.as_slice() {
            [] => b.init("curb-clear", &[&curb_names[i]]),
            [front] => {
                b.init("at-curb", &[front]);
                b.init("at-curb-num", &[front, &curb_names[i]]);
                b.init("car-clear", &[front]);
            }
            [front, back, ..] => {
                b.init("at-curb", &[front]);
                b.init("at-curb-num", &[front, &curb_names[i]]);
                b.init("behind-car", &[back, front]);
                b.init("car-clear", &[back]);
            }
        }
    }
    for x in &car_names {
        for y in &car_names {
            if x != y {
                b.init("different", &[x, y]);
            }
        }
    }
    let mut p = b.finish();
    let steps = rng.random_range(2 * cars..=4 * cars);
    walk_goal(DomainId::Parking, &mut p, &["at-curb-num", "behind-car"], steps, rng);
    p
}

pub(crate) fn cell(r: usize, c: usize) -> String {
    format!("f{r}-{c}f")
}

fn tetris(n: usize, rng: &mut ChaCha8Rng) -> ProblemDef {
    let mut b = Builder::new("tetris");
    for r in 0..n {
        for c in 0..n {
            let p = cell(r, c);
            b.obj(&p, "position");
            if r + 1 < n {
                b.init("above", &[&cell(r + 1, c), &p]);
                b.init("connected", &[&cell(r + 1, c), &p]);
                b.init("connected", &[&p, &cell(r + 1, c)]);
            }
            if c + 1 < n {
                b.init("right-of", &[&cell(r, c + 1), &p]);
                b.init("connected", &[&cell(r, c + 1), &p]);
                b.init("connected", &[&p, &cell(r, c + 1)]);
            }
        }
    }
    let per_kind = if n == 4 { 1 } else { 2 };
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let place = |cells: Vec<(i64, i64)>, used: &mut BTreeSet<(usize, usize)>| -> Option<Vec<(usize, usize)>> {
        let ok = cells
            .iter()
            .all(|&(r, c)| r >= 0 && c >= 0 && (r as usize) < n && (c as usize) < n && !used.contains(&(r as usize, c as usize)));
        if !ok {
            return None;
        }
        let cells: Vec<(usize, usize)> = cells.into_iter().map(|(r, c)| (r as usize, c as usize)).collect();
        used.extend(cells.iter().copied());
        Some(cells)
    };
    let ni = n as i64;
    for k in 0..per_kind {
        let name = format!("square{k}");
        b.obj(&name, "one-square");
        loop {
            let (r, c) = (rng.random_range(0..ni), rng.random_range(0..ni));
            if let Some(cs) = place(vec![(r, c)], &mut used) {
                b.init("at-square", &[&name, &cell(cs[0].0, cs[0].1)]);
                break;
            }
        }
        let name = format!("two{k}");
        b.obj(&name, "two-straight");
        loop {
            let (r, c) = (rng.random_range(0..ni), rng.random_range(0..ni));
            let (dr, dc) = *[(0, 1), (0, -1), (1, 0), (-1, 0)].choose(rng).unwrap();
            if let Some(cs) = place(vec![(r, c), (r + dr, c + dc)], &mut used) {
                b.init("at-two", &[&name, &cell(cs[0].0, cs[0].1), &cell(cs[1].0, cs[1].1)]);
                break;
            }
        }
        let name = format!("l{k}");
        b.obj(&name, "right-l");
        loop {
            let (r, c) = (rng.random_range(0..ni), rng.random_range(0..ni));
            // h left of the corner, v above (+1) or below (-1) it.
            let dv = if rng.random_bool(0.5) { 1 } else { -1 };
            if let Some(cs) = place(vec![(r, c - 1), (r + dv, c), (r, c)], &mut used) {
                let names: Vec<String> = cs.iter().map(|&(r, c)| cell(r, c)).collect();
                b.init("at-l", &[&name, &names[0], &names[1], &names[2]]);
                break;
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            if !used.contains(&(r, c)) {
                b.init("clear", &[&cell(r, c)]);
            }
        }
    }
    let mut p = b.finish();
    let steps = rng.random_range(4..=10);
    walk_goal(DomainId::Tetris, &mut p, &["at-square", "at-two", "at-l"], steps, rng);
    p
}

fn elevator(floors: usize, passengers: usize, rng: &mut ChaCha8Rng) -> ProblemDef {
    const COUNTS: usize = 4;
    let mut b = Builder::new("elevator");
    let f: Vec<String> = (0..floors).map(|i| format!("f{i}")).collect();
    let n: Vec<String> = (0..COUNTS).map(|i| format!("n{i}")).collect();
    for x in &f {
        b.obj(x, "floor");
    }
    for x in &n {
        b.obj(x, "count");
    }
    for i in 0..floors {
        for j in i + 1..floors {
            b.init("above", &[&f[i], &f[j]]);
        }
    }
    for w in n.windows(2) {
        b.init("next", &[&w[0], &w[1]]);
    }
    b.obj("slow0", "slow-elevator");
    b.obj("fast0", "fast-elevator");
    for x in &f {
        b.init("reachable-floor", &["slow0", x]);
    }
    let even: Vec<&String> = f.iter().step_by(2).collect();
    for x in &even {
        b.init("reachable-floor", &["fast0", x]);
    }
    b.init("lift-at", &["slow0", f.choose(rng).unwrap()]);
    b.init("lift-at", &["fast0", even.choose(rng).unwrap()]);
    b.init("passengers", &["slow0", &n[0]]);
    b.init("passengers", &["fast0", &n[0]]);
    for x in &n[1..3] {
        b.init("can-hold", &["slow0", x]);
    }
    for x in &n[1..] {
        b.init("can-hold", &["fast0", x]);
    }
    for i in 0..passengers {
        let p = format!("p{i}");
        b.obj(&p, "passenger");
        let from = rng.random_range(0..floors);
        let mut to = rng.random_range(0..floors - 1);
        if to >= from {
            to += 1;
        }
        b.init("passenger-at", &[&p, &f[from]]);
        b.goal("passenger-at", &[&p, &f[to]]);
    }
    b.finish()
}

fn barman(cocktails: usize, rng: &mut ChaCha8Rng) -> ProblemDef {
    const INGREDIENTS: usize = 3;
    let mut b = Builder::new("barman");
    for h in ["left", "right"] {
        b.obj(h, "hand");
        b.init("handempty", &[h]);
    }
    b.obj("shaker1", "shaker");
    let shots: Vec<String> = (1..=cocktails + 1).map(|i| format!("shot{i}")).collect();
    for s in shots.iter().map(String::as_str).chain(["shaker1"]) {
        if s != "shaker1" {
            b.obj(s, "shot");
        }
        b.init("ontable", &[s]);
        b.init("clean", &[s]);
        b.init("empty", &[s]);
    }
    for l in ["l0", "l1", "l2"] {
        b.obj(l, "level");
    }
    b.init("next", &["l0", "l1"]);
    b.init("next", &["l1", "l2"]);
    b.init("shaker-empty-level", &["shaker1", "l0"]);
    b.init("shaker-level", &["shaker1", "l0"]);
    let ingredients: Vec<String> = (1..=INGREDIENTS).map(|i| format!("ingredient{i}")).collect();
    for (i, ing) in ingredients.iter().enumerate() {
        let d = format!("dispenser{}", i + 1);
        b.obj(ing, "ingredient");
        b.obj(&d, "dispenser");
        b.init("dispenses", &[&d, ing]);
    }
    for i in 1..=cocktails {
        let c = format!("cocktail{i}");
        b.obj(&c, "cocktail");
        let pair: Vec<&String> = ingredients.choose_multiple(rng, 2).collect();
        b.init("cocktail-part1", &[&c, pair[0]]);
        b.init("cocktail-part2", &[&c, pair[1]]);
        b.goal("contains", &[&shots[i - 1], &c]);
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_problem;

    fn atoms<'a>(p: &'a ProblemDef, pred: &'a str) -> impl Iterator<Item = &'a GroundAtom> + 'a {
        p.init.atoms.iter().filter(move |a| a.predicate == pred)
    }

    #[test]
    fn blocksworld_configurations_are_towers() {
        let p = gen_instance(DomainId::Blocksworld, &GenParams::new(Size::Blocksworld { blocks: 3 }, 7)).unwrap();
        assert_eq!(p.objects.len(), 3);
        for x in p.objects.keys() {
            let on_table = p.init.contains(&GroundAtom::new("ontable", &[x]));
            let on_block = atoms(&p, "on").filter(|a| a.args[0] == *x).count();
            assert_eq!(on_table as usize + on_block, 1, "{x}");
        }
        // No cycles: following `on` from any block reaches the table.
        for x in p.objects.keys() {
            let mut cur = x.clone();
            for _ in 0..=3 {
                match atoms(&p, "on").find(|a| a.args[0] == cur) {
                    Some(a) => cur = a.args[1].clone(),
                    None => break,
                }
            }
            assert!(p.init.contains(&GroundAtom::new("ontable", &[&cur])));
        }
    }

    #[test]
    fn parking_respects_two_per_curb() {
        let p = gen_instance(DomainId::Parking, &GenParams::new(Size::Parking { curbs: 4, cars: 6 }, 1)).unwrap();
        let mut per_curb = BTreeMap::new();
        for a in atoms(&p, "at-curb-num") {
            *per_curb.entry(a.args[1].clone()).or_insert(0) += 1;
        }
        assert!(per_curb.values().all(|&n| n <= 1));
        assert_eq!(atoms(&p, "at-curb-num").count() + atoms(&p, "behind-car").count(), 6);
    }

    #[test]
    fn tetris_pieces_fit_the_grid() {
        let p = gen_instance(DomainId::Tetris, &GenParams::new(Size::Tetris { grid: 4 }, 0)).unwrap();
        let mut cells = BTreeSet::new();
        for a in p.init.atoms.iter().filter(|a| a.predicate.starts_with("at-")) {
            for c in &a.args[1..] {
                assert!(p.objects.contains_key(c));
                assert!(cells.insert(c.clone()), "overlap at {c}");
            }
        }
        assert_eq!(cells.len(), 6);
        assert_eq!(atoms(&p, "clear").count(), 10);
    }

    #[test]
    fn range_and_determinism() {
        let err = gen_instance(DomainId::Parking, &GenParams::new(Size::Parking { curbs: 9, cars: 4 }, 0));
        assert!(matches!(err, Err(GenError::Range(_))));
        for id in DomainId::ALL {
            let a = gen_instance(id, &GenParams::small(id, 3)).unwrap();
            let b = gen_instance(id, &GenParams::small(id, 3)).unwrap();
            assert_eq!(a.to_string(), b.to_string());
            // Printed instances parse back to the same problem.
            assert_eq!(parse_problem(&a.to_string(), &id.domain()).unwrap(), a);
        }
    }
}
