use std::io::Write;
use std::process::{Command, Output, Stdio};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");

fn norma(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_norma"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

fn course_coml(dir: &tempfile::TempDir) -> String {
    let path = dir.path().join("course.coml").to_string_lossy().into_owned();
    let o = norma(&["convert", &fixture("course.tsv"), "-o", &path], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

const REGISTER: [&str; 8] =
    ["--template", "7", "--bind", "agent=student", "--bind", "action=register for course", "--bind", "number=5"];

#[test]
fn check_exit_codes_and_trace_lines() {
    let dir = tempfile::tempdir().unwrap();
    let coml = course_coml(&dir);
    let mut args = vec!["check", coml.as_str()];
    args.extend(REGISTER);
    let o = norma(&args, None);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("NOT Satisfied\n"), "{out}");
    let reg = out.lines().find(|l| l.starts_with("- student register for course at time ")).unwrap();
    let t: u32 = reg.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((5..7).contains(&t));

    *args.last_mut().unwrap() = "number=7";
    let o = norma(&args, None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Satisfied\n");

    let o = norma(&["check", &coml, "--template", "1", "--bind", "agent=student"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("WRONG_QUERY_KIND"));
}

#[test]
fn errors_exit_with_two() {
    let o = norma(&["convert", "missing.tsv"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    let o = norma(&["show", "--codsh", "-"], Some("<contract"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("XML_MALFORMED"));
    let o = norma(&["extract", "-"], Some(""));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let coml = course_coml(&dir);
    let tsv_file = dir.path().join("course.tsv").to_string_lossy().into_owned();
    assert!(norma(&["extract", &fixture("course.txt"), "-o", &tsv_file], None).status.success());
    let text = std::fs::read_to_string(fixture("course.txt")).unwrap();
    let piped_tsv = stdout(&norma(&["extract", "-"], Some(&text)));
    assert_eq!(piped_tsv, std::fs::read_to_string(&tsv_file).unwrap());

    let tsv = std::fs::read_to_string(fixture("course.tsv")).unwrap();
    let piped_coml = stdout(&norma(&["convert", "-"], Some(&tsv)));
    assert_eq!(piped_coml, std::fs::read_to_string(&coml).unwrap());

    let run = ["query", "run", "-", "--template", "1", "--bind", "agent=student"];
    let piped = stdout(&norma(&run, Some(&piped_coml)));
    let mut from_file: Vec<&str> = run.to_vec();
    from_file[2] = &coml;
    assert_eq!(piped, stdout(&norma(&from_file, None)));
    assert_eq!(
        piped,
        "The following are obligations of student:\n- register for course\n- submit assignment\n- sign up for exam\n- pass exam\n"
    );
}

#[test]
fn translate_writes_model_and_queries() {
    let dir = tempfile::tempdir().unwrap();
    let coml = course_coml(&dir);
    let xml = dir.path().join("course.xml").to_string_lossy().into_owned();
    let q = dir.path().join("course.q").to_string_lossy().into_owned();
    let o = norma(&["translate", &coml, "-o", &xml, "--props", &q], None);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&xml).unwrap().contains("<nta>"));
    assert!(std::fs::read_to_string(&q).unwrap().starts_with("E<> allComplete()"));
}

#[test]
fn show_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let coml = course_coml(&dir);
    let cnl = stdout(&norma(&["show", "--cnl", &coml], None));
    assert!(cnl.starts_with("[c1] the student must register for course before time 7\n"));
    let codsh = stdout(&norma(&["show", "--codsh", &coml], None));
    assert!(codsh.contains("c1: O<student>(register for course)[t<7]"));
    let list = stdout(&norma(&["query", "list", &coml], None));
    assert_eq!(list.lines().filter(|l| !l.starts_with("    ")).count(), 10);
    assert!(list.contains("      agent: grader, student"));
    let o = norma(&["show", &coml], None);
    assert_eq!(o.status.code(), Some(2));
}
