//! Multiway merging with a loser tree.

/// Merges sorted runs into one sorted vector using a tournament (loser)
/// tree, `O(N log r)` comparisons for `r` runs of total length `N`.
pub fn merge_sorted<T: Ord + Copy>(runs: &[&[T]]) -> Vec<T> {
    let total: usize = runs.iter().map(|r| r.len()).sum();
    let mut out = Vec::with_capacity(total);
    match runs.len() {
        0 => {}
        1 => out.extend_from_slice(runs[0]),
        2 => merge_two(runs[0], runs[1], &mut out),
        _ => {
            let mut tree = LoserTree::new(runs);
            while let Some(x) = tree.pop() {
                out.push(x);
            }
        }
    }
    out
}

fn merge_two<T: Ord + Copy>(a: &[T], b: &[T], out: &mut Vec<T>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if b[j] < a[i] {
            out.push(b[j]);
            j += 1;
        } else {
            out.push(a[i]);
            i += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

struct LoserTree<'a, T> {
    runs: &'a [&'a [T]],
    pos: Vec<usize>,
    // tree[0] holds the overall winner, tree[1..k] the losers of inner matches
    tree: Vec<usize>,
    k: usize,
}

impl<'a, T: Ord + Copy> LoserTree<'a, T> {
    fn new(runs: &'a [&'a [T]]) -> Self {
        let k = runs.len();
        let mut t = LoserTree {
            runs,
            pos: vec![0; k],
            tree: vec![usize::MAX; k],
            k,
        };
        for leaf in 0..k {
            t.replay(leaf);
        }
        t
    }

    fn head(&self, run: usize) -> Option<T> {
        if run == usize::MAX {
            return None;
        }
        self.runs[run].get(self.pos[run]).copied()
    }

    /// `a` beats `b` if its head is smaller; exhausted runs always lose and
    /// ties go to the lower run index.
    fn beats(&self, a: usize, b: usize) -> bool {
        match (self.head(a), self.head(b)) {
            (Some(x), Some(y)) => x < y || (x == y && a < b),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => a != usize::MAX && (b == usize::MAX || a < b),
        }
    }

    fn replay(&mut self, leaf: usize) {
        let mut winner = leaf;
        let mut node = (leaf + self.k) / 2;
        while node > 0 {
            let other = self.tree[node];
            if other == usize::MAX {
                // slot not initialised yet: park the current winner here
                self.tree[node] = winner;
                return;
            }
            if self.beats(other, winner) {
                self.tree[node] = winner;
                winner = other;
            }
            node /= 2;
        }
        self.tree[0] = winner;
    }

    fn pop(&mut self) -> Option<T> {
        let w = self.tree[0];
        let x = self.head(w)?;
        self.pos[w] += 1;
        self.replay(w);
        Some(x)
    }
}
