use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::space::{Candidate, OrderingSpace, Plan, Pruning, BREAK};
use super::Objective;
use crate::amount::{value_serde, Amount, Value};
use crate::insertion::{optimize_alpha_with, AlphaSearch, InsertionProblem, Step};
use crate::state::{apply_tx_unguarded, State};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Randomized,
    #[default]
    Auto,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    pub mode: SearchMode,
    pub max_paths: u64,
    pub seed: u64,
    pub tractability_threshold: usize,
    pub workers: usize,
    pub pruning: Pruning,
    pub track_worst: bool,
    pub alpha: AlphaSearch,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            mode: SearchMode::Auto,
            max_paths: 400_000,
            seed: 0,
            tractability_threshold: 9,
            workers: 1,
            pruning: Pruning::Exact,
            track_worst: false,
            alpha: AlphaSearch::default(),
        }
    }
}

impl SearchBudget {
    pub fn exhaustive() -> Self {
        SearchBudget { mode: SearchMode::Exhaustive, ..Default::default() }
    }

    pub fn randomized(max_paths: u64, seed: u64) -> Self {
        SearchBudget { mode: SearchMode::Randomized, max_paths, seed, ..Default::default() }
    }

    pub fn workers(mut self, n: usize) -> Self {
        self.workers = n.max(1);
        self
    }

    pub fn pruning(mut self, p: Pruning) -> Self {
        self.pruning = p;
        self
    }

    pub fn with_worst(mut self) -> Self {
        self.track_worst = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(with = "value_serde")]
    pub value: Value,
    pub ordering: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<Amount>,
    #[serde(skip)]
    pub candidate: Candidate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvReport {
    pub best: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub worst: Option<Witness>,
    pub paths_explored: u64,
    pub exhaustive: bool,
}

impl EvReport {
    pub fn best_value(&self) -> Option<&Value> {
        self.best.as_ref().map(|w| &w.value)
    }
}

struct Entry {
    value: Value,
    cand: Candidate,
    alpha: Option<Amount>,
}

struct Acc<'p> {
    plan: &'p Plan,
    best: Option<Entry>,
    worst: Option<Entry>,
    paths: u64,
    track_worst: bool,
}

impl<'p> Acc<'p> {
    fn new(plan: &'p Plan, track_worst: bool) -> Self {
        Acc { plan, best: None, worst: None, paths: 0, track_worst }
    }

    fn offer(&mut self, value: Value, cand: &[u32], alpha: Option<Amount>) {
        let plan = self.plan;
        let wins = |slot: &Option<Entry>, max: bool| match slot {
            None => true,
            Some(e) => {
                let by_value = if max { value > e.value } else { value < e.value };
                by_value || (value == e.value && plan.cmp_key(cand, &e.cand).is_lt())
            }
        };
        if self.track_worst && wins(&self.worst, false) {
            self.worst = Some(Entry { value: value.clone(), cand: cand.to_vec(), alpha });
        }
        if wins(&self.best, true) {
            self.best = Some(Entry { value, cand: cand.to_vec(), alpha });
        }
    }

    fn merge(&mut self, other: Acc<'_>) {
        self.paths += other.paths;
        for e in [other.best, other.worst].into_iter().flatten() {
            self.offer(e.value, &e.cand, e.alpha);
        }
    }
}

/// A search node: either a concrete state or, once an `alpha` template is
/// placed, the state where the free part starts.
#[derive(Clone)]
enum Node {
    Concrete(State),
    Symbolic { base: State, start: usize },
}

struct Walker<'a> {
    space: &'a OrderingSpace,
    plan: &'a Plan,
    objective: &'a dyn Objective,
    alpha: AlphaSearch,
}

impl Walker<'_> {
    fn advance(&self, node: &Node, seq_len: usize, item: u32) -> Node {
        match node {
            Node::Symbolic { .. } => node.clone(),
            Node::Concrete(s) => {
                let mut s = s.clone();
                if item == BREAK {
                    s.block_number += 1;
                    return Node::Concrete(s);
                }
                let tx = self.space.item(item);
                if tx.has_alpha() {
                    return Node::Symbolic { base: s, start: seq_len };
                }
                if apply_tx_unguarded(&mut s, tx).is_err() {
                    return node.clone();
                }
                Node::Concrete(s)
            }
        }
    }

    fn terminal(&self, node: &Node, seq: &[u32], acc: &mut Acc<'_>) {
        acc.paths += 1;
        match node {
            Node::Concrete(s) => acc.offer(self.objective.value(s), seq, None),
            Node::Symbolic { base, start } => {
                let steps = seq[*start..]
                    .iter()
                    .map(|&i| if i == BREAK { Step::EndBlock } else { Step::Tx(self.space.item(i).clone()) })
                    .collect();
                let mut problem = InsertionProblem::new(base.clone(), steps);
                if let Some(lo) = self.alpha.lo {
                    problem.lo = lo;
                }
                if let Some(hi) = self.alpha.hi {
                    problem.hi = hi;
                }
                if let Some(opt) = optimize_alpha_with(&problem, self.objective, self.alpha) {
                    acc.offer(opt.value, seq, Some(opt.alpha));
                }
            }
        }
    }

    fn dfs(&self, node: &Node, seq: &mut Vec<u32>, used: u64, block: u32, acc: &mut Acc<'_>) {
        if self.plan.is_terminal(seq, used) {
            self.terminal(node, seq, acc);
        }
        for i in 0..self.plan.n() {
            if self.plan.can_append(seq, used, block, i) {
                let child = self.advance(node, seq.len(), i as u32);
                seq.push(i as u32);
                self.dfs(&child, seq, used | (1u64 << i), block, acc);
                seq.pop();
            }
        }
        if self.plan.can_break(block, used) {
            let child = self.advance(node, seq.len(), BREAK);
            seq.push(BREAK);
            self.dfs(&child, seq, used, block + 1, acc);
            seq.pop();
        }
    }

    fn replay(&self, root: &Node, prefix: &[u32]) -> (Node, u64, u32) {
        let mut node = root.clone();
        let (mut used, mut block) = (0u64, 0u32);
        for (pos, &i) in prefix.iter().enumerate() {
            node = self.advance(&node, pos, i);
            if i == BREAK {
                block += 1;
            } else {
                used |= 1u64 << i;
            }
        }
        (node, used, block)
    }

    fn run(&self, root: &Node, task: &Task, acc: &mut Acc<'_>) {
        let (node, used, block) = self.replay(root, &task.prefix);
        if task.subtree {
            let mut seq = task.prefix.clone();
            self.dfs(&node, &mut seq, used, block, acc);
        } else {
            self.terminal(&node, &task.prefix, acc);
        }
    }
}

/// A disjoint piece of the candidate set: either the prefix alone or the
/// prefix together with every extension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub prefix: Candidate,
    pub subtree: bool,
}

fn walk_static(plan: &Plan, seq: &mut Vec<u32>, used: u64, block: u32, visit: &mut dyn FnMut(&[u32]) -> bool) -> bool {
    if plan.is_terminal(seq, used) && !visit(seq) {
        return false;
    }
    for i in 0..plan.n() {
        if plan.can_append(seq, used, block, i) {
            seq.push(i as u32);
            let go = walk_static(plan, seq, used | (1u64 << i), block, visit);
            seq.pop();
            if !go {
                return false;
            }
        }
    }
    if plan.can_break(block, used) {
        seq.push(BREAK);
        let go = walk_static(plan, seq, used, block + 1, visit);
        seq.pop();
        return go;
    }
    true
}

fn tasks_at_depth(plan: &Plan, depth: usize) -> Vec<Task> {
    fn go(plan: &Plan, depth: usize, seq: &mut Vec<u32>, used: u64, block: u32, out: &mut Vec<Task>) {
        if seq.len() == depth {
            out.push(Task { prefix: seq.clone(), subtree: true });
            return;
        }
        if plan.is_terminal(seq, used) {
            out.push(Task { prefix: seq.clone(), subtree: false });
        }
        for i in 0..plan.n() {
            if plan.can_append(seq, used, block, i) {
                seq.push(i as u32);
                go(plan, depth, seq, used | (1u64 << i), block, out);
                seq.pop();
            }
        }
        if plan.can_break(block, used) {
            seq.push(BREAK);
            go(plan, depth, seq, used, block + 1, out);
            seq.pop();
        }
    }
    let mut out = Vec::new();
    go(plan, depth, &mut Vec::new(), 0, 0, &mut out);
    out
}

fn split_tasks(plan: &Plan, workers: usize) -> Vec<Task> {
    if workers <= 1 {
        return vec![Task { prefix: Vec::new(), subtree: true }];
    }
    let mut tasks = Vec::new();
    for depth in 1..=3 {
        tasks = tasks_at_depth(plan, depth);
        if tasks.len() >= 8 * workers {
            break;
        }
    }
    tasks
}

/// Every candidate the walk produces, in walk order.
pub fn enumerate(space: &OrderingSpace, state: &State, pruning: Pruning) -> Vec<Candidate> {
    let plan = Plan::new(space, state, pruning);
    let mut out = Vec::new();
    walk_static(&plan, &mut Vec::new(), 0, 0, &mut |s| {
        out.push(s.to_vec());
        true
    });
    out
}

/// Candidate count, or `None` once it exceeds `limit`.
pub fn count_candidates(space: &OrderingSpace, state: &State, pruning: Pruning, limit: Option<u64>) -> Option<u64> {
    let plan = Plan::new(space, state, pruning);
    count_plan(&plan, limit)
}

fn count_plan(plan: &Plan, limit: Option<u64>) -> Option<u64> {
    let mut n = 0u64;
    let done = walk_static(plan, &mut Vec::new(), 0, 0, &mut |_| {
        n += 1;
        limit.is_none_or(|l| n <= l)
    });
    done.then_some(n)
}

/// Splits the candidate set into `parts` disjoint groups of tasks.
pub fn partition(space: &OrderingSpace, state: &State, pruning: Pruning, parts: usize) -> Vec<Vec<Task>> {
    let plan = Plan::new(space, state, pruning);
    let parts = parts.max(1);
    let mut out = vec![Vec::new(); parts];
    for (i, t) in split_tasks(&plan, parts).into_iter().enumerate() {
        out[i % parts].push(t);
    }
    out
}

/// Candidates covered by one task.
pub fn enumerate_task(space: &OrderingSpace, state: &State, pruning: Pruning, task: &Task) -> Vec<Candidate> {
    let plan = Plan::new(space, state, pruning);
    if !task.subtree {
        return vec![task.prefix.clone()];
    }
    let (mut used, mut block) = (0u64, 0u32);
    for &i in &task.prefix {
        if i == BREAK {
            block += 1;
        } else {
            used |= 1u64 << i;
        }
    }
    let mut out = Vec::new();
    let mut seq = task.prefix.clone();
    walk_static(&plan, &mut seq, used, block, &mut |s| {
        out.push(s.to_vec());
        true
    });
    out
}

/// Whether `cand` is one of the sequences the walk produces.
pub fn is_canonical(space: &OrderingSpace, state: &State, pruning: Pruning, cand: &[u32]) -> bool {
    let plan = Plan::new(space, state, pruning);
    walkable(&plan, cand)
}

fn walkable(plan: &Plan, cand: &[u32]) -> bool {
    let (mut used, mut block) = (0u64, 0u32);
    for (pos, &i) in cand.iter().enumerate() {
        let seq = &cand[..pos];
        if i == BREAK {
            if !plan.can_break(block, used) {
                return false;
            }
            block += 1;
        } else {
            if !plan.can_append(seq, used, block, i as usize) {
                return false;
            }
            used |= 1u64 << i;
        }
    }
    plan.is_terminal(cand, used)
}

/// Canonical representative of an arbitrary feasible sequence.
pub fn canonicalize(space: &OrderingSpace, state: &State, pruning: Pruning, seq: &[u32]) -> Candidate {
    Plan::new(space, state, pruning).canonicalize(seq)
}

fn random_candidate(plan: &Plan, rng: &mut ChaCha8Rng) -> Candidate {
    let n = plan.n();
    let mut picked: Vec<(u32, u32)> = Vec::new();
    for i in 0..n {
        let b = 1u64 << i;
        if plan.usable & b == 0 {
            continue;
        }
        if plan.required & b == 0 && !rng.gen_bool(0.5) {
            continue;
        }
        let arrival = plan.items[i].arrival;
        let block = if plan.k > 1 { rng.gen_range(arrival..plan.k) } else { 0 };
        picked.push((block, i as u32));
    }
    picked.shuffle(rng);
    if !plan.reorder {
        // Keep mempool entries in submission order across the slots they took.
        let mut slots: Vec<usize> = Vec::new();
        let mut mem: Vec<(u32, u32)> = Vec::new();
        for (pos, p) in picked.iter().enumerate() {
            if (p.1 as usize) < plan.n_mempool {
                slots.push(pos);
                mem.push(*p);
            }
        }
        let mut blocks: Vec<u32> = mem.iter().map(|p| p.0).collect();
        blocks.sort_unstable();
        mem.sort_unstable_by_key(|p| p.1);
        for ((slot, m), b) in slots.into_iter().zip(mem).zip(blocks) {
            picked[slot] = (b, m.1);
        }
    }
    picked.sort_by_key(|p| p.0);
    let mut seq = Vec::with_capacity(picked.len() + plan.k as usize);
    let mut block = 0;
    for (b, i) in picked {
        while block < b {
            seq.push(BREAK);
            block += 1;
        }
        seq.push(i);
    }
    seq
}

fn sample(plan: &Plan, budget: &SearchBudget) -> Vec<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let target = budget.max_paths as usize;
    let mut seen: HashSet<Candidate> = HashSet::new();
    let mut out = Vec::new();
    let cap = budget.max_paths.saturating_mul(50).saturating_add(1000);
    let mut attempts = 0u64;
    while out.len() < target && attempts < cap {
        attempts += 1;
        let raw = random_candidate(plan, &mut rng);
        let cand = plan.canonicalize(&raw);
        if !walkable(plan, &cand) {
            continue;
        }
        if seen.insert(cand.clone()) {
            out.push(cand);
        }
    }
    out
}

fn execute<'p>(walker: &Walker<'p>, root: &Node, tasks: &[Task], workers: usize, track_worst: bool) -> Acc<'p> {
    let plan = walker.plan;
    if workers <= 1 || tasks.len() <= 1 {
        let mut acc = Acc::new(plan, track_worst);
        for t in tasks {
            walker.run(root, t, &mut acc);
        }
        return acc;
    }
    let next = AtomicUsize::new(0);
    let partials: Vec<Acc<'p>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers.min(tasks.len()))
            .map(|_| {
                scope.spawn(|| {
                    let mut acc = Acc::new(plan, track_worst);
                    loop {
                        let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                        let Some(t) = tasks.get(i) else { break };
                        walker.run(root, t, &mut acc);
                    }
                    acc
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("search worker panicked")).collect()
    });
    let mut acc = Acc::new(plan, track_worst);
    for p in partials {
        acc.merge(p);
    }
    acc
}

/// Best (and optionally worst) objective over the ordering space.
pub fn search(state: &State, space: &OrderingSpace, objective: &dyn Objective, budget: &SearchBudget) -> EvReport {
    let plan = Plan::new(space, state, budget.pruning);
    let walker = Walker { space, plan: &plan, objective, alpha: budget.alpha };
    let root = Node::Concrete(state.clone());

    let usable = plan.usable.count_ones() as usize;
    let exhaustive = match budget.mode {
        SearchMode::Exhaustive => true,
        SearchMode::Auto if usable <= budget.tractability_threshold => true,
        _ => count_plan(&plan, Some(budget.max_paths)).is_some(),
    };
    let tasks: Vec<Task> = if exhaustive {
        split_tasks(&plan, budget.workers)
    } else {
        sample(&plan, budget).into_iter().map(|prefix| Task { prefix, subtree: false }).collect()
    };
    let acc = execute(&walker, &root, &tasks, budget.workers, budget.track_worst);

    let witness = |e: Entry| Witness { ordering: space.render(&e.cand), value: e.value, alpha: e.alpha, candidate: e.cand };
    EvReport {
        best: acc.best.map(witness),
        worst: acc.worst.map(witness),
        paths_explored: acc.paths,
        exhaustive,
    }
}

/// Value of the given ordering under `objective`, with `alpha` bound.
pub fn evaluate_candidate(
    state: &State,
    space: &OrderingSpace,
    cand: &[u32],
    alpha: Option<Amount>,
) -> Option<State> {
    let steps: Vec<Step> = cand
        .iter()
        .map(|&i| if i == BREAK { Step::EndBlock } else { Step::Tx(space.item(i).clone()) })
        .collect();
    crate::insertion::run_steps(state, &steps, alpha.unwrap_or(Amount::ZERO))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockResult {
    #[serde(with = "value_serde")]
    pub value: Value,
    pub ordering: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<Amount>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiBlockReport {
    /// Objective after each block, cumulative.
    pub blocks: Vec<BlockResult>,
    pub paths_explored: u64,
    pub exhaustive: bool,
}

impl MultiBlockReport {
    pub fn value(&self) -> Option<&Value> {
        self.blocks.last().map(|b| &b.value)
    }
}

/// Block-by-block: each block gets the best ordering of what is pending,
/// then the chain moves on. Prefix `j` of the report is the greedy answer for
/// `k = j + 1`.
pub fn search_greedy_blocks(
    state: &State,
    space: &OrderingSpace,
    objective: &dyn Objective,
    budget: &SearchBudget,
) -> MultiBlockReport {
    let mut state = state.clone();
    let mut pending_mem: Vec<usize> = (0..space.mempool.len()).collect();
    let mut pending_tpl: Vec<usize> = (0..space.templates.len()).collect();
    let mut out = MultiBlockReport { blocks: Vec::new(), paths_explored: 0, exhaustive: true };
    for j in 0..space.k.max(1) {
        let mem: Vec<usize> = pending_mem.iter().copied().filter(|&i| space.mempool[i].arrival <= j).collect();
        let sub = OrderingSpace {
            mempool: mem.iter().map(|&i| space.mempool[i].clone().arriving_at(0)).collect(),
            templates: pending_tpl.iter().map(|&i| space.templates[i].clone().arriving_at(0)).collect(),
            k: 1,
            ..space.clone()
        };
        let rep = search(&state, &sub, objective, budget);
        out.paths_explored += rep.paths_explored;
        out.exhaustive &= rep.exhaustive;
        let Some(best) = rep.best else { break };
        state = evaluate_candidate(&state, &sub, &best.candidate, best.alpha).expect("best candidate replays");
        let taken: Vec<usize> = best.candidate.iter().map(|&c| c as usize).collect();
        let used_tpl: Vec<usize> = taken.iter().filter(|&&c| c >= mem.len()).map(|&c| pending_tpl[c - mem.len()]).collect();
        pending_mem.retain(|i| !taken.iter().any(|&c| c < mem.len() && mem[c] == *i));
        pending_tpl.retain(|i| !used_tpl.contains(i));
        out.blocks.push(BlockResult { value: best.value, ordering: best.ordering, alpha: best.alpha });
        state.block_number += 1;
    }
    out
}
