// Placeholder until the harness modules land; replaced by the full CLI.
int main() { return 0; }
