package flakemend_driver;

import java.io.PrintWriter;
import java.io.StringWriter;
import java.nio.charset.StandardCharsets;
import java.nio.file.Files;
import java.nio.file.Path;
import java.nio.file.Paths;
import java.util.ArrayList;
import java.util.Base64;
import java.util.List;

import org.junit.Test;
import org.junit.runner.JUnitCore;
import org.junit.runner.Request;
import org.junit.runner.Result;
import org.junit.runner.notification.Failure;

/** Runs the tests listed in target/flakemend/sequence.txt, in order, in this JVM. */
public class OrderedRunDriver {

    @Test
    public void runSequence() throws Exception {
        Path dir = Paths.get("target", "flakemend");
        List<String> sequence = Files.readAllLines(dir.resolve("sequence.txt"), StandardCharsets.UTF_8);
        List<String> out = new ArrayList<>();
        JUnitCore core = new JUnitCore();
        for (String raw : sequence) {
            String id = raw.trim();
            if (id.isEmpty()) {
                continue;
            }
            int hash = id.indexOf('#');
            String className = id.substring(0, hash);
            String method = id.substring(hash + 1);
            Class<?> type;
            try {
                type = Class.forName(className);
            } catch (ClassNotFoundException e) {
                out.add("NOTFOUND\t" + id);
                continue;
            }
            long start = System.nanoTime();
            Result result = core.run(Request.method(type, method));
            double seconds = (System.nanoTime() - start) / 1e9;
            if (result.getFailureCount() == 0) {
                out.add("PASS\t" + id + "\t" + seconds);
                continue;
            }
            Failure failure = result.getFailures().get(0);
            String message = String.valueOf(failure.getMessage());
            if (message.startsWith("No tests found matching")) {
                out.add("NOTFOUND\t" + id);
                continue;
            }
            StringWriter trace = new StringWriter();
            failure.getException().printStackTrace(new PrintWriter(trace));
            out.add("FAIL\t" + id + "\t" + seconds + "\t" + encode(message) + "\t" + encode(trace.toString()));
        }
        Files.write(dir.resolve("results.txt"), out, StandardCharsets.UTF_8);
    }

    private static String encode(String text) {
        return Base64.getEncoder().encodeToString(text.getBytes(StandardCharsets.UTF_8));
    }
}
