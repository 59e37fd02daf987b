#include <cstdio>

int main() {
    std::puts("lcva: placeholder");
    return 0;
}
