//! Dinic max-flow on real capacities, sized for bipartite transport checks.

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: f64,
}

#[derive(Debug)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<Edge>>,
    tol: f64,
}

impl FlowNetwork {
    /// `tol` is the residual capacity treated as zero.
    pub(crate) fn new(nodes: usize, tol: f64) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            tol,
        }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge { to, rev: rev_from, cap });
        self.adj[to].push(Edge {
            to: from,
            rev: rev_to,
            cap: 0.0,
        });
    }

    fn levels(&self, s: usize) -> Vec<i32> {
        let mut level = vec![-1; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        level[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for e in &self.adj[v] {
                if e.cap > self.tol && level[e.to] < 0 {
                    level[e.to] = level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, v: usize, t: usize, pushed: f64, level: &[i32], next: &mut [usize]) -> f64 {
        if v == t {
            return pushed;
        }
        while next[v] < self.adj[v].len() {
            let i = next[v];
            let (to, cap) = (self.adj[v][i].to, self.adj[v][i].cap);
            if cap > self.tol && level[to] == level[v] + 1 {
                let got = self.augment(to, t, pushed.min(cap), level, next);
                if got > 0.0 {
                    let rev = self.adj[v][i].rev;
                    self.adj[v][i].cap -= got;
                    self.adj[to][rev].cap += got;
                    return got;
                }
            }
            next[v] += 1;
        }
        0.0
    }

    pub(crate) fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(s);
            if level[t] < 0 {
                return total;
            }
            let mut next = vec![0; self.adj.len()];
            loop {
                let got = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if got <= 0.0 {
                    break;
                }
                total += got;
            }
        }
    }
}
