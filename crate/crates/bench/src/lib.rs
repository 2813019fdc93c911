//! Shared fixtures for the benchmarks.

use nilflow::{parse_program, Program};

/// A loop counts a secret down and copies the count to a low global.
pub const FUNC: &str = "
low l;
high h;

proc func(in x1, out b) {
  letvar c := 0 in {
    while (x1 > 0) {
      c++;
      x1--;
    }
    b := c;
  }
}

proc main() {
  func(h, l);
}
";

/// Secure: every path writes a constant to the low global.
pub const BRANCH: &str = "
low l;
high h;

proc main() {
  if (h > 0) { l := 1; } else { l := 1; }
}
";

pub fn program(source: &str) -> Program {
    parse_program(source).expect("fixture parses")
}
