//! Constant-time least-common-ancestor queries over a rooted tree via an Euler
//! tour and a sparse table of range minima on depth.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LcaIndex {
    first: Vec<u32>,
    depth: Vec<u32>,
    /// `table[j][i]` = node of minimal depth in `euler[i .. i + 2^j]`.
    table: Vec<Vec<u32>>,
}

impl LcaIndex {
    pub(crate) fn new(root: usize, children: &[Vec<usize>]) -> Self {
        let count = children.len();
        let mut first = vec![u32::MAX; count];
        let mut depth = vec![0u32; count];
        let mut euler: Vec<u32> = Vec::with_capacity(2 * count);
        // Iterative DFS: (node, next child position).
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        first[root] = 0;
        euler.push(root as u32);
        while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
            if *pos < children[node].len() {
                let child = children[node][*pos];
                *pos += 1;
                depth[child] = depth[node] + 1;
                first[child] = euler.len() as u32;
                euler.push(child as u32);
                stack.push((child, 0));
            } else {
                stack.pop();
                if let Some(&(parent, _)) = stack.last() {
                    euler.push(parent as u32);
                }
            }
        }

        let len = euler.len();
        let levels = usize::BITS as usize - len.leading_zeros() as usize;
        let mut table = Vec::with_capacity(levels);
        table.push(euler);
        for j in 1..levels {
            let half = 1usize << (j - 1);
            let prev = &table[j - 1];
            let row: Vec<u32> = (0..=len - (1 << j))
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + half]);
                    if depth[b as usize] < depth[a as usize] {
                        b
                    } else {
                        a
                    }
                })
                .collect();
            table.push(row);
        }
        LcaIndex { first, depth, table }
    }

    pub(crate) fn depth(&self, node: usize) -> usize {
        self.depth[node] as usize
    }

    pub(crate) fn lca(&self, a: usize, b: usize) -> usize {
        let (mut l, mut r) = (self.first[a] as usize, self.first[b] as usize);
        if l > r {
            std::mem::swap(&mut l, &mut r);
        }
        let span = r - l + 1;
        let j = usize::BITS as usize - 1 - span.leading_zeros() as usize;
        let x = self.table[j][l];
        let y = self.table[j][r + 1 - (1 << j)];
        if self.depth[y as usize] < self.depth[x as usize] {
            y as usize
        } else {
            x as usize
        }
    }
}
