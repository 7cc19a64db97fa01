package stitch;

public interface Check {
    void verify();
}
