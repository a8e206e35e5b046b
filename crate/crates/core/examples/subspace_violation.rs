//! Three members in R^4 observed through their first component. Plain EKI
//! keeps every member in the span of the old ensemble; the corrected update
//! moves member 1 out of it. For this particular ensemble a = 2 lands back in
//! the span by coincidence: the increment is orthogonal to (1, 1, -1, 0).

use ekisec::harness::{check_subspace_violation, SubspaceCase};

fn main() -> ekisec::Result<()> {
    let case = SubspaceCase::worked_example();
    for a in [0.0, 0.5, 1.0, 2.0] {
        let report = check_subspace_violation(&case, a, 1e-8)?;
        let rel: Vec<String> = report.relative.iter().map(|r| format!("{r:.2e}")).collect();
        println!("a={a:<3} relative residuals [{}] in span: {}", rel.join(", "), report.all_in_span());
    }
    Ok(())
}
