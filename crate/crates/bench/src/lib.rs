//! Benchmark fixtures shared by the criterion targets.

use std::sync::Arc;

use parahom::fem::Assembler;
use parahom::{Medium, MediumSpec, Mesh};

/// Fine mesh, assembler and a percolation medium with a fixed seed.
pub fn percolation_fixture(n: usize) -> (Arc<Mesh>, Assembler, Medium) {
    let mesh = Arc::new(Mesh::uniform(n).expect("valid mesh size"));
    let asm = Assembler::new(mesh.clone());
    let medium = MediumSpec::percolation().build(&mesh, 7).expect("percolation builds");
    (mesh, asm, medium)
}
