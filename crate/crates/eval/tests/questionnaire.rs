use assistlab_eval::questionnaire::read_column;
use assistlab_eval::{EvalError, QuestionnaireRecord};

fn rec(l: [u8; 4]) -> QuestionnaireRecord {
    QuestionnaireRecord { session_id: "s1".into(), trial_id: "t1".into(), l1: l[0], l2: l[1], l3: l[2], l4: l[3] }
}

#[test]
fn responses_must_be_on_the_scale() {
    assert!(rec([7, 6, 6, 5]).validate().is_ok());
    assert!(rec([1, 1, 1, 1]).validate().is_ok());
    assert!(matches!(rec([0, 4, 4, 4]).validate(), Err(EvalError::InvalidResponse(_))));
    assert!(matches!(rec([4, 4, 4, 8]).validate(), Err(EvalError::InvalidResponse(_))));
}

#[test]
fn csv_round_trip_and_columns() {
    let rows = vec![rec([7, 6, 6, 5]), rec([2, 3, 4, 1])];
    let mut buf = Vec::new();
    QuestionnaireRecord::write_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("session_id,trial_id,L1,L2,L3,L4"));
    assert_eq!(QuestionnaireRecord::read_csv(buf.as_slice()).unwrap(), rows);
    assert_eq!(read_column(buf.as_slice(), "L1").unwrap(), vec![7.0, 2.0]);
    assert!(read_column(buf.as_slice(), "L9").is_err());
}

#[test]
fn out_of_range_rows_fail_to_load() {
    let csv = "session_id,trial_id,L1,L2,L3,L4\ns,t,4,4,9,4\n";
    assert!(matches!(QuestionnaireRecord::read_csv(csv.as_bytes()), Err(EvalError::InvalidResponse(_))));
}

#[test]
fn non_numeric_column_values_report_the_line() {
    let csv = "x\n1.5\nabc\n";
    assert!(matches!(read_column(csv.as_bytes(), "x"), Err(EvalError::Schema { line: 3, .. })));
}
