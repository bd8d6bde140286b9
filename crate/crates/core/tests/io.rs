use gradgraph::ftau::calibrate_isotropic;
use gradgraph::io::{read_field_csv, read_profile_csv, write_field_csv, write_profile_csv, IoError};
use gradgraph::radial::{integrate_radial, PerturbedRhs, RadialInit};
use gradgraph::{Field64, Grid64, TauParams64};

#[test]
fn field_csv_roundtrip_is_exact() {
    let grid = Grid64::new(1.5, 300.0, 40, 12).unwrap();
    let f = Field64::from_cartesian(grid, |x| x[0] * x[1] / 7.0 + (x[0] * x[0] + x[1] * x[1]).ln());
    let mut buf = Vec::new();
    write_field_csv(&mut buf, &f).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("r,theta,value\n"));
    assert_eq!(text.lines().count(), 1 + 40 * 12);
    let back: Field64 = read_field_csv(buf.as_slice()).unwrap();
    assert_eq!(back.values(), f.values());
    let mut again = Vec::new();
    write_field_csv(&mut again, &back).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn profile_csv_roundtrip() {
    let p = TauParams64::new(0.6).unwrap();
    let lam = calibrate_isotropic(&p, -0.5).unwrap();
    let rhs = PerturbedRhs::new(-0.5, 0.01, 3.0).unwrap();
    let prof = integrate_radial(&p, &rhs, RadialInit::on_quadratic(lam, 1.0, 0.0), 50.0, 64).unwrap();
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &prof).unwrap();
    let rows = read_profile_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), prof.len());
    for (row, i) in rows.iter().zip(0..) {
        assert_eq!(
            (row.r, row.u, row.du, row.ddu),
            (prof.r[i], prof.u[i], prof.du[i], prof.ddu[i])
        );
    }
}

#[test]
fn malformed_inputs() {
    let dup = "r,theta,value\n2,0,1\n2,0,1\n4,0,1\n4,0,2\n";
    assert!(read_field_csv::<f64, _>(dup.as_bytes()).is_err());
    let missing_column = "r,theta\n2,0\n";
    assert!(matches!(
        read_field_csv::<f64, _>(missing_column.as_bytes()),
        Err(IoError::Csv(_))
    ));
    let text = "r,u,du,ddu\n1,x,1,1\n";
    assert!(matches!(read_profile_csv(text.as_bytes()), Err(IoError::Csv(_))));
    assert!(read_field_csv::<f64, _>("r,theta,value\n".as_bytes()).is_err());
}
