fn main() {
    println!("fcid");
}
