fn main() {
    let path = std::env::args().nth(1).expect("usage: urdf_check <file>");
    match urdf_rs::read_file(&path) {
        Ok(robot) => {
            println!("OK {} links={} joints={}", robot.name, robot.links.len(), robot.joints.len());
        }
        Err(e) => {
            eprintln!("PARSE ERROR: {}", e);
            std::process::exit(1);
        }
    }
}
