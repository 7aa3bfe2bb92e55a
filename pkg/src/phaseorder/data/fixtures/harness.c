/* Harness for fake kernels: main(), timing and output dump live here. */
int main(void) { return 0; }
