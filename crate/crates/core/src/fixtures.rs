//! Deterministic test networks and pinned codes used by the test suites and
//! exposed through the CLI.

use crate::galois::FieldContext;
use crate::netgraph::Network;
use crate::rlnc::{CodeInstance, Matrix};

/// The 7-node butterfly multicast network: source 1 sends two symbols to
/// receivers 6 and 7 through relays 2..=5. Node ids keep the conventional
/// 1-based labels, so id 0 is allocated but unused.
///
/// Edges, in canonical id order:
/// 1->2, 1->3, 2->4, 3->4, 4->5, 2->6, 5->6, 3->7, 5->7.
pub fn butterfly_network() -> Network {
    Network::build(
        8,
        vec![
            (1, 2),
            (1, 3),
            (2, 4),
            (3, 4),
            (4, 5),
            (2, 6),
            (5, 6),
            (3, 7),
            (5, 7),
        ],
        vec![1],
        vec![6, 7],
    )
    .expect("butterfly fixture is valid")
}

/// The classic binary code on the butterfly, pinned: x1 travels 1->2, x2
/// travels 1->3, every relay forwards with coefficient 1, and node 4 emits
/// the sum x1+x2 toward node 5. Works over any field since all coefficients
/// are 0 or 1.
///
/// Under this code node 4 decodes everything, node 5 sees only the sum, and
/// nodes 2 and 3 each read one raw symbol.
pub fn fig1_code(ctx: FieldContext) -> CodeInstance {
    let net = butterfly_network();
    let mut a = Matrix::zeros(ctx, 2, 9);
    a[(0, 0)] = 1; // x1 on 1->2
    a[(1, 1)] = 1; // x2 on 1->3
    let mut f = Matrix::zeros(ctx, 9, 9);
    for (feeder, fed) in [
        (0, 2), // 1->2 feeds 2->4
        (0, 5), // 1->2 feeds 2->6
        (1, 3), // 1->3 feeds 3->4
        (1, 7), // 1->3 feeds 3->7
        (2, 4), // 2->4 feeds 4->5
        (3, 4), // 3->4 feeds 4->5  (node 4 sums its inputs)
        (4, 6), // 4->5 feeds 5->6
        (4, 8), // 4->5 feeds 5->7
    ] {
        f[(feeder, fed)] = 1;
    }
    CodeInstance::from_parts(&net, ctx, 2, a, f, 0).expect("fig1 fixture is valid")
}

/// Two-relay diamond: source 1 reaches receiver 4 through relays 2 and 3.
/// Node ids keep 1-based labels; id 0 is allocated but unused.
pub fn relay_pair_network() -> Network {
    Network::build(5, vec![(1, 2), (1, 3), (2, 4), (3, 4)], vec![1], vec![4])
        .expect("relay-pair fixture is valid")
}

/// Protected two-symbol scheme on the relay pair: each relay receives a
/// dense combination (x1+x2 on one branch, x1+g*x2 on the other, g a field
/// element outside {0,1}), so neither recovers any symbol while the receiver
/// still sees full rank. Needs q >= 4 for two independent dense columns.
pub fn fig2_protected_code(ctx: FieldContext) -> CodeInstance {
    assert!(ctx.q() >= 4, "protected scheme needs q >= 4");
    let net = relay_pair_network();
    let mut a = Matrix::zeros(ctx, 2, 4);
    a[(0, 0)] = 1; // x1 + x2 on 1->2
    a[(1, 0)] = 1;
    a[(0, 1)] = 1; // x1 + g*x2 on 1->3
    a[(1, 1)] = 2;
    let mut f = Matrix::zeros(ctx, 4, 4);
    f[(0, 2)] = 1; // relay 2 forwards
    f[(1, 3)] = 1; // relay 3 forwards
    CodeInstance::from_parts(&net, ctx, 2, a, f, 0).expect("fig2 protected fixture is valid")
}

/// Unprotected scheme on the relay pair: each relay receives one raw symbol
/// and can read half the data outright.
pub fn fig2_unprotected_code(ctx: FieldContext) -> CodeInstance {
    let net = relay_pair_network();
    let mut a = Matrix::zeros(ctx, 2, 4);
    a[(0, 0)] = 1; // x1 on 1->2
    a[(1, 1)] = 1; // x2 on 1->3
    let mut f = Matrix::zeros(ctx, 4, 4);
    f[(0, 2)] = 1;
    f[(1, 3)] = 1;
    CodeInstance::from_parts(&net, ctx, 2, a, f, 0).expect("fig2 unprotected fixture is valid")
}
