fn main() {
    println!("railsurge");
}
