//! Small reference networks with fixed parameters, shared across the test
//! suites and mirrored by the JSON fixture files of the command-line tool.

use std::collections::BTreeMap;

use crate::model::{ClgSpec, CptSpec, Network, VarDecl, VarId};

/// Three binary roots each driving one continuous child, all three children
/// feeding a continuous sink.
///
/// Arcs: X1->Y1, X2->Y2, X3->Y3, {Y1,Y2,Y3}->Y4. The continuous variables
/// are declared sink-first so that the deterministic tie-breaking of the
/// tree compiler produces the chain of cliques
/// {X1,X2,X3,Y1} - {X2,X3,Y1,Y2} - {X3,Y1,Y2,Y3} - {Y1,Y2,Y3,Y4}
/// rooted at the all-discrete end.
pub mod net_a {
    use super::*;

    pub const X1: VarId = VarId(0);
    pub const X2: VarId = VarId(1);
    pub const X3: VarId = VarId(2);
    pub const Y4: VarId = VarId(3);
    pub const Y3: VarId = VarId(4);
    pub const Y2: VarId = VarId(5);
    pub const Y1: VarId = VarId(6);

    pub fn network() -> Network {
        let decls = vec![
            VarDecl::binary(),
            VarDecl::binary(),
            VarDecl::binary(),
            VarDecl::Continuous,
            VarDecl::Continuous,
            VarDecl::Continuous,
            VarDecl::Continuous,
        ];
        let parents = vec![
            vec![],
            vec![],
            vec![],
            vec![Y1, Y2, Y3],
            vec![X3],
            vec![X2],
            vec![X1],
        ];
        let mut cpts = BTreeMap::new();
        cpts.insert(
            X1,
            CptSpec {
                head: X1,
                tail: vec![],
                table: vec![0.3, 0.7],
            },
        );
        cpts.insert(
            X2,
            CptSpec {
                head: X2,
                tail: vec![],
                table: vec![0.6, 0.4],
            },
        );
        cpts.insert(
            X3,
            CptSpec {
                head: X3,
                tail: vec![],
                table: vec![0.2, 0.8],
            },
        );
        let mut densities = BTreeMap::new();
        densities.insert(
            Y1,
            ClgSpec {
                head: Y1,
                discrete_tail: vec![X1],
                continuous_tail: vec![],
                alpha: vec![-1.0, 1.0],
                beta: vec![vec![], vec![]],
                sigma2: vec![1.0, 0.5],
            },
        );
        densities.insert(
            Y2,
            ClgSpec {
                head: Y2,
                discrete_tail: vec![X2],
                continuous_tail: vec![],
                alpha: vec![0.0, 2.0],
                beta: vec![vec![], vec![]],
                sigma2: vec![0.8, 1.2],
            },
        );
        densities.insert(
            Y3,
            ClgSpec {
                head: Y3,
                discrete_tail: vec![X3],
                continuous_tail: vec![],
                alpha: vec![0.5, -0.5],
                beta: vec![vec![], vec![]],
                sigma2: vec![2.0, 1.0],
            },
        );
        densities.insert(
            Y4,
            ClgSpec {
                head: Y4,
                discrete_tail: vec![],
                continuous_tail: vec![Y1, Y2, Y3],
                alpha: vec![0.3],
                beta: vec![vec![1.0, -0.5, 0.25]],
                sigma2: vec![1.5],
            },
        );
        Network::new(decls, parents, cpts, densities).unwrap()
    }
}

/// Discrete root with a two-link continuous chain: X -> Y1 -> Y2.
/// Compiles to cliques {X,Y1} (root) and {Y1,Y2} with separator {Y1}.
pub mod net_b {
    use super::*;

    pub const X: VarId = VarId(0);
    pub const Y1: VarId = VarId(1);
    pub const Y2: VarId = VarId(2);

    pub fn network() -> Network {
        let decls = vec![VarDecl::binary(), VarDecl::Continuous, VarDecl::Continuous];
        let parents = vec![vec![], vec![X], vec![Y1]];
        let mut cpts = BTreeMap::new();
        cpts.insert(
            X,
            CptSpec {
                head: X,
                tail: vec![],
                table: vec![0.3, 0.7],
            },
        );
        let mut densities = BTreeMap::new();
        densities.insert(
            Y1,
            ClgSpec {
                head: Y1,
                discrete_tail: vec![X],
                continuous_tail: vec![],
                alpha: vec![-1.0, 2.0],
                beta: vec![vec![], vec![]],
                sigma2: vec![1.0, 0.5],
            },
        );
        densities.insert(
            Y2,
            ClgSpec {
                head: Y2,
                discrete_tail: vec![],
                continuous_tail: vec![Y1],
                alpha: vec![0.5],
                beta: vec![vec![1.5]],
                sigma2: vec![2.0],
            },
        );
        Network::new(decls, parents, cpts, densities).unwrap()
    }
}

/// Discrete chain X1 -> X2 with continuous children: X1 -> Y1 and
/// {X1,X2} -> Y2. The prior of Y1 has one component per state of X1; the
/// prior of Y2 has one per joint state of (X1, X2).
pub mod net_c {
    use super::*;

    pub const X1: VarId = VarId(0);
    pub const X2: VarId = VarId(1);
    pub const Y1: VarId = VarId(2);
    pub const Y2: VarId = VarId(3);

    pub fn network() -> Network {
        let decls = vec![
            VarDecl::binary(),
            VarDecl::binary(),
            VarDecl::Continuous,
            VarDecl::Continuous,
        ];
        let parents = vec![vec![], vec![X1], vec![X1], vec![X1, X2]];
        let mut cpts = BTreeMap::new();
        cpts.insert(
            X1,
            CptSpec {
                head: X1,
                tail: vec![],
                table: vec![0.4, 0.6],
            },
        );
        cpts.insert(
            X2,
            CptSpec {
                head: X2,
                tail: vec![X1],
                // P(x2 = 0 | x1) = (0.7, 0.2)
                table: vec![0.7, 0.2, 0.3, 0.8],
            },
        );
        let mut densities = BTreeMap::new();
        densities.insert(
            Y1,
            ClgSpec {
                head: Y1,
                discrete_tail: vec![X1],
                continuous_tail: vec![],
                alpha: vec![0.0, 3.0],
                beta: vec![vec![], vec![]],
                sigma2: vec![1.0, 2.0],
            },
        );
        densities.insert(
            Y2,
            ClgSpec {
                head: Y2,
                discrete_tail: vec![X1, X2],
                continuous_tail: vec![],
                alpha: vec![-1.0, 0.0, 1.0, 2.0],
                beta: vec![vec![], vec![], vec![], vec![]],
                sigma2: vec![0.5, 1.0, 1.5, 2.0],
            },
        );
        Network::new(decls, parents, cpts, densities).unwrap()
    }
}

/// One discrete root over a diamond of continuous variables:
/// X1 -> Y1, {X1,Y1,Y2} -> Y3, {Y1,Y4} -> Y2, Y4 a continuous root.
/// Compiles to cliques {X1,Y1,Y2,Y3} (root) and {Y1,Y2,Y4}.
pub mod net_d {
    use super::*;

    pub const X1: VarId = VarId(0);
    pub const Y1: VarId = VarId(1);
    pub const Y2: VarId = VarId(2);
    pub const Y3: VarId = VarId(3);
    pub const Y4: VarId = VarId(4);

    pub fn network() -> Network {
        let decls = vec![
            VarDecl::binary(),
            VarDecl::Continuous,
            VarDecl::Continuous,
            VarDecl::Continuous,
            VarDecl::Continuous,
        ];
        let parents = vec![vec![], vec![X1], vec![Y1, Y4], vec![X1, Y1, Y2], vec![]];
        let mut cpts = BTreeMap::new();
        cpts.insert(
            X1,
            CptSpec {
                head: X1,
                tail: vec![],
                table: vec![0.45, 0.55],
            },
        );
        let mut densities = BTreeMap::new();
        densities.insert(
            Y1,
            ClgSpec {
                head: Y1,
                discrete_tail: vec![X1],
                continuous_tail: vec![],
                alpha: vec![0.0, 1.0],
                beta: vec![vec![], vec![]],
                sigma2: vec![1.0, 1.0],
            },
        );
        densities.insert(
            Y2,
            ClgSpec {
                head: Y2,
                discrete_tail: vec![],
                continuous_tail: vec![Y1, Y4],
                alpha: vec![0.2],
                beta: vec![vec![0.8, -0.6]],
                sigma2: vec![0.7],
            },
        );
        densities.insert(
            Y3,
            ClgSpec {
                head: Y3,
                discrete_tail: vec![X1],
                continuous_tail: vec![Y1, Y2],
                alpha: vec![-0.3, 0.3],
                beta: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
                sigma2: vec![1.1, 0.9],
            },
        );
        densities.insert(
            Y4,
            ClgSpec {
                head: Y4,
                discrete_tail: vec![],
                continuous_tail: vec![],
                alpha: vec![1.0],
                beta: vec![vec![]],
                sigma2: vec![0.5],
            },
        );
        Network::new(decls, parents, cpts, densities).unwrap()
    }
}

/// Discrete chain with a continuous tail hanging off the end:
/// X1 -> X2 -> X3 -> Y -> Y2. The clique {X3,Y} sits under an all-discrete
/// separator, which makes it a boundary clique with a subtree below it.
pub mod net_e {
    use super::*;

    pub const X1: VarId = VarId(0);
    pub const X2: VarId = VarId(1);
    pub const X3: VarId = VarId(2);
    pub const Y: VarId = VarId(3);
    pub const Y2: VarId = VarId(4);

    pub fn network() -> Network {
        let decls = vec![
            VarDecl::binary(),
            VarDecl::binary(),
            VarDecl::binary(),
            VarDecl::Continuous,
            VarDecl::Continuous,
        ];
        let parents = vec![vec![], vec![X1], vec![X2], vec![X3], vec![Y]];
        let mut cpts = BTreeMap::new();
        cpts.insert(
            X1,
            CptSpec {
                head: X1,
                tail: vec![],
                table: vec![0.25, 0.75],
            },
        );
        cpts.insert(
            X2,
            CptSpec {
                head: X2,
                tail: vec![X1],
                table: vec![0.9, 0.4, 0.1, 0.6],
            },
        );
        cpts.insert(
            X3,
            CptSpec {
                head: X3,
                tail: vec![X2],
                table: vec![0.55, 0.15, 0.45, 0.85],
            },
        );
        let mut densities = BTreeMap::new();
        densities.insert(
            Y,
            ClgSpec {
                head: Y,
                discrete_tail: vec![X3],
                continuous_tail: vec![],
                alpha: vec![-2.0, 2.0],
                beta: vec![vec![], vec![]],
                sigma2: vec![1.0, 1.5],
            },
        );
        densities.insert(
            Y2,
            ClgSpec {
                head: Y2,
                discrete_tail: vec![],
                continuous_tail: vec![Y],
                alpha: vec![0.1],
                beta: vec![vec![2.0]],
                sigma2: vec![0.4],
            },
        );
        Network::new(decls, parents, cpts, densities).unwrap()
    }
}
