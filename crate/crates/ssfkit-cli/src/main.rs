fn main() {
    println!("ssfkit");
}
